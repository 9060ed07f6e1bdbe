"""Acceptance criteria 1-8.

Each ``check_N`` returns (passed, detail).  Under pytest the outcome of every
criterion is also printed as a single PASS/FAIL line in the terminal summary;
``python3 tests/test_acceptance.py`` runs the checks standalone and prints the
same lines.
"""

import sys
import tempfile
import time
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).resolve().parent))

from nmqubits.bath import BathSpec, compute_coefficients, damping_closed_form  # noqa: E402
from nmqubits.dynamics import QubitPair, XState, evolve, full_lindblad_oracle  # noqa: E402
from nmqubits.entanglement import concurrence_general, concurrence_x  # noqa: E402
from nmqubits.dynamics import x_density_matrix  # noqa: E402
from nmqubits.harness import ExperimentConfig, run_sweep  # noqa: E402
from nmqubits.preparation import PreparationPlan, basis_state, evolve_closed  # noqa: E402

from conftest import FIG2_INI, FIG3_INI, oracle_coefficients, random_x_array  # noqa: E402

RESULTS = {}

ORACLE_SETS = [(0.1, 0.0), (1.0, 0.03), (10.0, 1.0)]
KERNEL_SETS = [(0.1, 0.0), (0.1, 1.0), (10.0, 0.0), (10.0, 1.0)]
FIG2_KT = (0.03, 1.0, 10.0, 100.0)
FIG3_R = (0.3, 1.0, 10.0)
TRACE_TOL = 1e-9
_trajectory_trace_errors = {}


def _record(n, ok, detail):
    RESULTS[n] = (ok, detail)
    return ok, detail


def check_1():
    """X-state equations vs full 4x4 master equation, 5 states x 3 baths, abs 1e-8."""
    start = time.perf_counter()
    rng = np.random.default_rng(1)
    worst, errs = 0.0, []
    for r, kT in ORACLE_SETS:
        coeffs = compute_coefficients(BathSpec.from_ratio(r, kT), 30.0)
        for i in range(5):
            y0 = random_x_array(rng)
            q = QubitPair.regime(4.0 if i % 2 else 0.0)
            traj = evolve(XState.from_array(y0), q, coeffs, 30.0, tol=1e-12)
            _, rhos = full_lindblad_oracle(x_density_matrix(y0), q, coeffs, 30.0)
            got = np.array([XState.from_density_matrix(m).as_array() for m in rhos])
            worst = max(worst, float(np.max(np.abs(got - traj.states))))
            errs.append(traj.trace_error)
    _trajectory_trace_errors["criterion 1"] = max(errs)
    elapsed = time.perf_counter() - start
    ok = worst < 1e-8 and elapsed < 60
    return _record(1, ok, f"max |X - oracle| = {worst:.2e} (< 1e-8), {elapsed:.1f} s (< 60 s)")


def check_2():
    start = time.perf_counter()
    ys = random_x_array(np.random.default_rng(2), 1000)
    worst = max(abs(concurrence_x(y) - concurrence_general(x_density_matrix(y))) for y in ys)
    elapsed = time.perf_counter() - start
    ok = worst < 1e-10 and elapsed < 10
    return _record(2, ok, f"max |C_x - C_general| = {worst:.2e} over 1000 states, {elapsed:.2f} s")


def check_3():
    psi = evolve_closed(basis_state("ge"), PreparationPlan(j_coupling=0.5))
    c = concurrence_general(np.outer(psi, psi.conj()))
    ok = abs(c - 1.0) < 1e-12
    return _record(3, ok, f"C = 1 - {1.0 - c:.2e}")


def check_4():
    start = time.perf_counter()
    rng = np.random.default_rng(4)
    worst_d = worst_g = worst_closed = 0.0
    for r, kT in KERNEL_SETS:
        tr = compute_coefficients(BathSpec.from_ratio(r, kT), 30.0)
        for t in rng.uniform(0.0, 30.0, 10):
            d, g = oracle_coefficients(tr.spec, t)
            worst_d = max(worst_d, abs(float(tr.delta_at(t)) - d) / abs(d))
            worst_g = max(worst_g, abs(float(tr.gamma_at(t)) - g) / abs(g))
        closed = damping_closed_form(tr.spec, tr.grid[1:])
        worst_closed = max(worst_closed, float(np.max(np.abs(tr.gamma[1:] - closed) / np.abs(closed))))
    elapsed = time.perf_counter() - start
    ok = worst_d < 1e-5 and worst_g < 1e-5 and worst_closed < 1e-6 and elapsed < 120
    return _record(4, ok, f"rel err Delta {worst_d:.1e}, gamma {worst_g:.1e} (< 1e-5); "
                          f"gamma vs closed form {worst_closed:.1e} (< 1e-6); {elapsed:.1f} s")


def _deaths_non_increasing(deaths, dt):
    vals = [np.inf if d is None else d for d in deaths]
    return all(b <= a + dt for a, b in zip(vals, vals[1:]))


def check_5(result):
    dt = result.config.dt_out
    parts, ok = [], True
    for reg in (0.0, 4.0):
        deaths = [result.cell(kT, 0.1, reg).first("death") for kT in FIG2_KT]
        mono = _deaths_non_increasing(deaths, dt)
        ok &= mono
        parts.append(f"reg{reg:g} first ESD {['none' if d is None else round(float(d), 2) for d in deaths]}"
                     f" {'non-increasing' if mono else 'NOT non-increasing'}")
    missing = []
    for kT in FIG2_KT:
        if kT < 1.0:
            continue
        kinds = [e.kind for e in result.cell(kT, 0.1, 0.0).events]
        if not any(a == "death" and b == "birth" for a, b in zip(kinds, kinds[1:])):
            missing.append(kT)
    ok &= not missing
    parts.append("ESB for every kT >= 1" if not missing else f"no ESB at kT = {missing}")
    amp_fail = []
    amps = []
    for kT in FIG2_KT:
        a0 = result.cell(kT, 0.1, 0.0).trace.oscillation_amplitude()
        a4 = result.cell(kT, 0.1, 4.0).trace.oscillation_amplitude()
        amps.append(f"{kT:g}: {a4:.3f} vs {a0:.3f}")
        if not a4 < a0:
            amp_fail.append(kT)
    ok &= not amp_fail
    parts.append("amplitude reg4 vs reg0 {" + ", ".join(amps) + "}"
                 + ("" if not amp_fail else f" not smaller at kT = {amp_fail}"))
    return _record(5, bool(ok), "; ".join(parts))


def check_6(result):
    parts, ok = [], True
    for reg in (0.0, 4.0):
        hl = [result.cell(0.03, r, reg).trace.half_life() for r in FIG3_R]
        vals = [np.inf if h is None else h for h in hl]
        mono = all(b <= a + result.config.dt_out for a, b in zip(vals, vals[1:]))
        ok &= mono
        parts.append(f"reg{reg:g} half-life at kT=0.03 {[round(float(v), 2) for v in vals]}"
                     f" {'non-increasing' if mono else 'NOT non-increasing'}")
    both = []
    for r in FIG3_R:
        for reg in (0.0, 4.0):
            kinds = {e.kind for e in result.cell(1.0, r, reg).events}
            if {"death", "birth"} <= kinds:
                both.append((r, reg))
    ok &= bool(both)
    parts.append(f"kT=1 cells with ESD and ESB: {both}" if both
                 else "kT=1: no r shows both ESD and ESB")
    return _record(6, bool(ok), "; ".join(parts))


def check_7(fig2, fig3):
    errs = dict(_trajectory_trace_errors)
    bad = []
    for label, res in (("criterion 5", fig2), ("criterion 6", fig3)):
        worst = 0.0
        for c in res.cells:
            if not c.ok or c.trace_error is None or not c.trace_error < TRACE_TOL:
                bad.append(f"{c.id} ({c.trace_error if c.ok else c.error})")
            if c.ok and c.trace_error is not None:
                worst = max(worst, c.trace_error)
        errs[label] = worst
    bad += [k for k, v in _trajectory_trace_errors.items() if not v < TRACE_TOL]
    summary = ", ".join(f"{k}: {v:.1e}" for k, v in errs.items())
    if "criterion 1" not in errs:
        bad.append("criterion 1 trajectories not run")
    ok = not bad
    detail = f"max |tr rho - 1| {summary}" + ("" if ok else f"; over 1e-9: {bad}")
    return _record(7, ok, detail)


DETERMINISM_INI = """
[bath]
kT = 1
r = 0.1

[qubits]
regimes = 0, 4

[run]
t_final = 30
fixed_step = 0.01
"""


def check_8(tmpdir):
    cfg = ExperimentConfig.from_text(DETERMINISM_INI)
    a, b = Path(tmpdir) / "run_a", Path(tmpdir) / "run_b"
    run_sweep(cfg, a)
    run_sweep(cfg, b)
    names = sorted(p.name for p in a.glob("*.csv"))
    differ = [n for n in names if (a / n).read_bytes() != (b / n).read_bytes()]
    ok = bool(names) and not differ
    return _record(8, ok, f"{len(names)} CSVs compared, {len(differ)} differ")


# pytest entry points -------------------------------------------------------

def _assert(result):
    ok, detail = result
    assert ok, detail


def test_criterion_1_oracle_equivalence():
    _assert(check_1())


def test_criterion_2_concurrence_equivalence():
    _assert(check_2())


def test_criterion_3_bell_generation():
    _assert(check_3())


def test_criterion_4_kernel_correctness():
    _assert(check_4())


def test_criterion_5_temperature_family(fig2_result):
    _assert(check_5(fig2_result))


def test_criterion_6_cutoff_family(fig3_result):
    _assert(check_6(fig3_result))


def test_criterion_7_trace_conservation(fig2_result, fig3_result):
    if "criterion 1" not in _trajectory_trace_errors:
        check_1()
    _assert(check_7(fig2_result, fig3_result))


def test_criterion_8_determinism(tmp_path):
    _assert(check_8(tmp_path))


def format_results():
    lines = []
    for n in range(1, 9):
        if n in RESULTS:
            ok, detail = RESULTS[n]
            lines.append(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
        else:
            lines.append(f"criterion {n}: NOT RUN")
    return lines


if __name__ == "__main__":
    check_1()
    check_2()
    check_3()
    check_4()
    with tempfile.TemporaryDirectory() as tmp:
        fig2 = run_sweep(ExperimentConfig.from_text(FIG2_INI), Path(tmp) / "fig2")
        fig3 = run_sweep(ExperimentConfig.from_text(FIG3_INI), Path(tmp) / "fig3")
        check_5(fig2)
        check_6(fig3)
        check_7(fig2, fig3)
        check_8(tmp)
    print("\n".join(format_results()))
    sys.exit(0 if all(ok for ok, _ in RESULTS.values()) else 1)
