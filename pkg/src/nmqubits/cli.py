"""Command line entry point: coeffs, evolve, sweep, events, plots.

Exit codes: 0 success, 1 config error, 2 numerical failure in every cell,
3 partial failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from .bath import BathSpec, compute_coefficients
from .dynamics import QubitPair, evolve
from .entanglement import EntanglementTrace, detect_events, write_events_csv
from .errors import ConfigError, NumericalError
from .harness import (ExperimentConfig, SweepResult, provenance, cell_id, emit_plots,
                      format_summary, run_sweep, summarize_events, write_summary_csv)
from .preparation import bell_initial_xstate

EXIT_OK, EXIT_CONFIG, EXIT_ALL_FAILED, EXIT_PARTIAL = 0, 1, 2, 3


def _load_config(args) -> ExperimentConfig:
    overrides = {"tol": args.tol, "fixed_step": args.fixed_step}
    if args.config is None:
        raise ConfigError("--config is required")
    return ExperimentConfig.load(args.config, **overrides)


def _out_dir(args, config=None) -> Path:
    out = Path(args.out) if args.out else Path(config.out_dir if config else "out")
    out.mkdir(parents=True, exist_ok=True)
    return out


def _single_cell(args, config):
    kT = args.kT if args.kT is not None else config.kT[0]
    r = args.r if args.r is not None else config.r[0]
    regime = args.regime if args.regime is not None else config.regimes[0]
    return kT, r, regime


def cmd_coeffs(args) -> int:
    config = _load_config(args)
    kT, r, _ = _single_cell(args, config)
    out = _out_dir(args, config)
    spec = BathSpec.from_ratio(r, kT, gamma0=config.gamma0)
    try:
        trace = compute_coefficients(spec, config.t_final)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ALL_FAILED
    path = trace.to_csv(out / f"coeffs_kT{kT:g}_r{r:g}.csv",
                        provenance(config, kind="coefficients", kT=kT, r=r))
    print(path)
    return EXIT_OK


def cmd_evolve(args) -> int:
    config = _load_config(args)
    kT, r, regime = _single_cell(args, config)
    out = _out_dir(args, config)
    try:
        coeffs = compute_coefficients(BathSpec.from_ratio(r, kT, gamma0=config.gamma0),
                                      config.t_final)
        qubits = QubitPair.regime(regime, ej0=config.ej0, j_coupling=config.j_coupling)
        traj = evolve(bell_initial_xstate(), qubits, coeffs, config.t_final, tol=config.tol,
                      dt_out=config.dt_out, fixed_step=config.fixed_step, strict=False)
    except NumericalError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_ALL_FAILED
    trace = EntanglementTrace.from_trajectory(traj)
    events = detect_events(trace, config.threshold)
    cid = cell_id(kT, r, regime)
    prov = provenance(config, kT=kT, r=r, regime=regime)
    traj.to_csv(out / f"trajectory_{cid}.csv", prov)
    trace.to_csv(out / f"concurrence_{cid}.csv", prov)
    write_events_csv(events, out / f"events_{cid}.csv", prov)
    print(f"{cid}: {len(events)} events, trace error {traj.trace_error:.2e}, "
          f"min eigenvalue {traj.min_eigenvalue:.3e}")
    return EXIT_OK


def cmd_sweep(args) -> int:
    config = _load_config(args)
    out = _out_dir(args, config)
    result = run_sweep(config, out, workers=args.workers)
    rows = summarize_events(result)
    write_summary_csv(rows, out / "events_summary.csv", provenance(config, kind="summary"))
    print(format_summary(rows))
    for cell in result.cells:
        if not cell.ok:
            print(f"cell {cell.id} failed: {cell.error}", file=sys.stderr)
    return result.exit_code()


def _load_result(args) -> SweepResult:
    if not args.out:
        raise ConfigError("--out must point at a sweep output directory")
    return SweepResult.load(args.out)


def cmd_events(args) -> int:
    try:
        result = _load_result(args)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    rows = summarize_events(result)
    write_summary_csv(rows, Path(args.out) / "events_summary.csv",
                      provenance(result.config, kind="summary"))
    print(format_summary(rows))
    return result.exit_code()


def cmd_plots(args) -> int:
    try:
        result = _load_result(args)
        paths = emit_plots(result, style=args.style)
    except FileNotFoundError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    for p in paths:
        print(p)
    return EXIT_OK


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="experiment config file (INI style)")
    common.add_argument("--out", help="output directory")
    common.add_argument("--workers", type=int, default=1, help="process pool size for sweeps")
    common.add_argument("--fixed-step", type=float, default=None, dest="fixed_step",
                        help="use fixed-step RK4 with this maximum step")
    common.add_argument("--tol", type=float, default=None, help="absolute integrator tolerance")
    common.add_argument("-v", "--verbose", action="store_true")

    cell = argparse.ArgumentParser(add_help=False)
    cell.add_argument("--kT", type=float, default=None, help="temperature (default: first in config)")
    cell.add_argument("--r", type=float, default=None, help="cutoff ratio (default: first in config)")
    cell.add_argument("--regime", type=float, default=None,
                      help="|E_J1 - E_J2| in units of E_J0 (default: first in config)")

    parser = argparse.ArgumentParser(prog="nmqubits", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sub.add_parser("coeffs", parents=[common, cell], help="write a coefficient trace CSV")
    sub.add_parser("evolve", parents=[common, cell], help="run a single trajectory")
    sub.add_parser("sweep", parents=[common], help="run the full (kT, r, regime) grid")
    sub.add_parser("events", parents=[common], help="summarize death/birth times of a sweep")
    plots = sub.add_parser("plots", parents=[common], help="emit plot scripts for a sweep")
    plots.add_argument("--style", choices=["kT", "r", "both"], default="both")
    return parser


COMMANDS = {"coeffs": cmd_coeffs, "evolve": cmd_evolve, "sweep": cmd_sweep,
            "events": cmd_events, "plots": cmd_plots}


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        return COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
