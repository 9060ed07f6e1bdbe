"""Shared fixtures and independent oracles for the test suite.

The oracles here deliberately avoid the package's own quadrature code so a
mistake there cannot silently cancel against the expected value.
"""

import sys

import numpy as np
import pytest
from scipy import integrate

from nmqubits.bath import BathSpec, compute_coefficients


def spectral(omega, gamma0, omega_c):
    return (2.0 * gamma0 / np.pi) * omega * omega_c**2 / (omega_c**2 + omega**2)


def _two_j_coth(w, spec):
    """2 J(w) coth(w / 2kT), with the finite w -> 0 limit written out."""
    pref = 4.0 * spec.gamma0 * spec.omega_c**2 / (np.pi * (spec.omega_c**2 + w * w))
    if spec.kT <= 0:
        return pref * w
    x = w / (2.0 * spec.kT)
    return pref * (w / np.tanh(x) if x > 1e-6 else 2.0 * spec.kT)


def oracle_noise_kernel(spec: BathSpec, tau: float) -> float:
    """k(tau) = 2 int_0^inf J(w) coth(w/2T) cos(w tau) dw by a Fourier quadrature."""
    val, _ = integrate.quad(_two_j_coth, 0.0, np.inf, args=(spec,), weight="cos", wvar=tau,
                            limlst=200)
    return val


def oracle_dissipation_kernel(spec: BathSpec, tau: float) -> float:
    f = lambda w: 2.0 * spectral(w, spec.gamma0, spec.omega_c)
    val, _ = integrate.quad(f, 0.0, np.inf, weight="sin", wvar=tau, limlst=200)
    return val


def oracle_coefficients(spec: BathSpec, t: float):
    """Brute-force nested quadrature: outer over tau in [0, t], inner over omega."""
    w0 = spec.omega0
    delta, _ = integrate.quad(lambda s: oracle_noise_kernel(spec, s) * np.cos(w0 * s),
                              0.0, t, limit=400, epsabs=1e-12, epsrel=1e-10)
    gamma, _ = integrate.quad(lambda s: oracle_dissipation_kernel(spec, s) * np.sin(w0 * s),
                              0.0, t, limit=400, epsabs=1e-12, epsrel=1e-10)
    return delta, gamma


def random_x_array(rng, n=None):
    """Random physical X states as length-8 arrays (a, b, c, d, e, f, m, n)."""
    size = 1 if n is None else n
    pops = rng.dirichlet(np.ones(4), size=size)
    a, b, c, d = pops.T
    r1 = np.sqrt(b * c) * rng.uniform(0, 1, size)
    r2 = np.sqrt(a * d) * rng.uniform(0, 1, size)
    p1, p2 = rng.uniform(0, 2 * np.pi, (2, size))
    out = np.column_stack([a, b, c, d, r1 * np.cos(p1), r1 * np.sin(p1),
                           r2 * np.cos(p2), r2 * np.sin(p2)])
    return out[0] if n is None else out


_COEFF_CACHE = {}


@pytest.fixture(scope="session")
def coefficient_cache():
    """compute_coefficients memoised on (r, kT, t_final) for the whole session."""
    def get(r, kT, t_final=30.0):
        key = (r, kT, t_final)
        if key not in _COEFF_CACHE:
            _COEFF_CACHE[key] = compute_coefficients(BathSpec.from_ratio(r, kT), t_final)
        return _COEFF_CACHE[key]
    return get


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


FIG2_INI = """
[bath]
kT = 0, 0.03, 1, 10, 100
r = 0.1

[qubits]
regimes = 0, 4

[run]
t_final = 30

[output]
name = fig2
"""

FIG3_INI = """
[bath]
kT = 0.03, 1
r = 0.3, 1, 10

[qubits]
regimes = 0, 4

[run]
t_final = 30

[output]
name = fig3
"""


@pytest.fixture(scope="session")
def fig2_result(tmp_path_factory):
    from nmqubits.harness import ExperimentConfig, run_sweep
    out = tmp_path_factory.mktemp("fig2")
    return run_sweep(ExperimentConfig.from_text(FIG2_INI), out, workers=2)


@pytest.fixture(scope="session")
def fig3_result(tmp_path_factory):
    from nmqubits.harness import ExperimentConfig, run_sweep
    out = tmp_path_factory.mktemp("fig3")
    return run_sweep(ExperimentConfig.from_text(FIG3_INI), out, workers=2)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    if mod is None or not mod.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for line in mod.format_results():
        terminalreporter.write_line(line)
