"""Ohmic bath with Lorentz-Drude cutoff: kernels and time-dependent coefficients.

Internal units are normalized to the system frequency (``omega0 = 1``,
``hbar = k_B = 1``).  The frequency appearing inside the time integrals for
the diffusive and damping coefficients is taken to be ``omega0``.

    J(w)     = (2 gamma0 / pi) w wc^2 / (wc^2 + w^2)
    k(tau)   = 2 int_0^inf J(w) coth(w / 2kT) cos(w tau) dw
    mu(tau)  = 2 int_0^inf J(w) sin(w tau) dw
    Delta(t) = int_0^t k(tau) cos(omega0 tau) dtau
    gamma(t) = int_0^t mu(tau) sin(omega0 tau) dtau
"""

from __future__ import annotations

import csv
import warnings
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy.integrate import IntegrationWarning, quad
from scipy.interpolate import CubicSpline
from scipy.special import exp1

from .errors import ContractError, QuadratureError

ZERO_TEMPERATURE = 1e-12
CUTOFF_MULTIPLE = 50.0
SAMPLE_SPACING = 0.05
QUAD_RELTOL = 1e-8
GAUSS_ORDER = 4
ADAPTIVE_SEGMENTS = 4

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class BathSpec:
    """Bath and system-frequency parameters.

    ``r`` is derived from ``omega_c / omega0`` and cannot be passed in.
    """

    gamma0: float = 1.0
    omega_c: float = 1.0
    omega0: float = 1.0
    kT: float = 0.0
    r: float = field(init=False)

    def __post_init__(self):
        if not self.gamma0 > 0:
            raise ContractError(f"gamma0 must be positive, got {self.gamma0}")
        if not self.omega_c > 0:
            raise ContractError(f"omega_c must be positive, got {self.omega_c}")
        if not self.omega0 > 0:
            raise ContractError(f"omega0 must be positive, got {self.omega0}")
        if not self.kT >= 0:
            raise ContractError(f"kT must be non-negative, got {self.kT}")
        object.__setattr__(self, "r", self.omega_c / self.omega0)

    @classmethod
    def from_ratio(cls, r: float, kT: float = 0.0, gamma0: float = 1.0,
                   omega0: float = 1.0) -> "BathSpec":
        return cls(gamma0=gamma0, omega_c=r * omega0, omega0=omega0, kT=kT)

    @property
    def zero_temperature(self) -> bool:
        return self.kT <= ZERO_TEMPERATURE * self.omega0

    @property
    def omega_max(self) -> float:
        """Upper limit of the finite frequency quadrature; an exact tail covers the rest."""
        return CUTOFF_MULTIPLE * max(self.omega_c, self.kT, self.omega0)

    @property
    def max_spacing(self) -> float:
        return SAMPLE_SPACING * min(1.0 / self.omega0, 1.0 / self.omega_c)


def spectral_density(spec: BathSpec, omega: ArrayLike) -> ArrayLike:
    """Ohmic spectral density with a Lorentz-Drude cutoff."""
    w = np.asarray(omega, dtype=float)
    if np.any(w < 0):
        raise ContractError("spectral density is defined for omega >= 0 only")
    wc2 = spec.omega_c ** 2
    out = 2.0 * spec.gamma0 / np.pi * w * wc2 / (wc2 + w * w)
    return float(out) if out.ndim == 0 else out


def _thermal_weighted(spec: BathSpec, w: float) -> float:
    """2 J(w) coth(w / 2kT), finite at w = 0."""
    pref = 4.0 * spec.gamma0 * spec.omega_c ** 2 / np.pi
    lorentz = pref / (w * w + spec.omega_c ** 2)
    if spec.zero_temperature:
        return lorentz * w
    x = w / (2.0 * spec.kT)
    if x < 1e-3:
        # w coth(x) = 2kT (x coth x), series to O(x^4)
        return lorentz * 2.0 * spec.kT * (1.0 + x * x / 3.0 - x ** 4 / 45.0)
    return lorentz * w / np.tanh(x)


def _scaled_exp1(z: complex) -> complex:
    """exp(z) * E1(z) without overflow for large |z|."""
    if abs(z) < 40.0:
        return np.exp(z) * exp1(z)
    # asymptotic series, terms shrink at least as fast as n/|z|
    term = 1.0 / z
    total = term
    for n in range(1, 30):
        term *= -n / z
        total += term
        if abs(term) < 1e-17 * abs(total):
            break
    return total


def _lorentz_tail(tau: float, lower: float, a: float) -> complex:
    """Exact int_lower^inf w exp(i w tau) / (w^2 + a^2) dw for tau > 0.

    The real part is the cosine transform tail and the imaginary part the
    sine transform tail.
    """
    phase = np.exp(1j * tau * lower)
    z_plus = a * tau - 1j * tau * lower
    z_minus = -a * tau - 1j * tau * lower
    return 0.5 * phase * (_scaled_exp1(z_plus) + _scaled_exp1(z_minus))


def _checked_quad(func, a, b, *, weight, wvar, epsrel=QUAD_RELTOL, where=None):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", IntegrationWarning)
        value, abserr, info = quad(func, a, b, weight=weight, wvar=wvar,
                                   epsabs=0.0, epsrel=epsrel, limit=2000,
                                   full_output=1)[:3]
    # QUADPACK flags roundoff-limited runs too; only a large achieved error is fatal.
    if abserr > max(1e-6 * abs(value), 1e-13):
        raise QuadratureError(
            f"frequency quadrature did not converge at {where}: "
            f"value={value:.6g}, error estimate={abserr:.3g}",
            achieved=abserr, where=where)
    return value


def noise_kernel(spec: BathSpec, tau: float) -> float:
    """Noise kernel k(tau) by oscillatory quadrature.

    The finite range [0, omega_max] is integrated adaptively with a cosine
    weight; above ``omega_max`` the thermal factor is 1 to double precision
    and the remaining Lorentzian tail is evaluated in closed form via the
    exponential integral.  k(0) diverges logarithmically and is returned as
    ``inf``.
    """
    if tau < 0:
        raise ContractError(f"tau must be non-negative, got {tau}")
    if tau == 0:
        return np.inf
    W = spec.omega_max
    body = _checked_quad(lambda w: _thermal_weighted(spec, w), 0.0, W,
                         weight="cos", wvar=tau, where=f"noise_kernel(tau={tau:g})")
    pref = 4.0 * spec.gamma0 * spec.omega_c ** 2 / np.pi
    return body + pref * _lorentz_tail(tau, W, spec.omega_c).real


def dissipation_kernel(spec: BathSpec, tau: float, method: str = "quadrature") -> float:
    """Dissipation kernel mu(tau).

    ``method="closed"`` uses 2 gamma0 wc^2 exp(-wc tau) for tau > 0.  Both
    paths return exactly 0 at tau = 0, where the sine transform vanishes.
    """
    if tau < 0:
        raise ContractError(f"tau must be non-negative, got {tau}")
    if tau == 0:
        return 0.0
    if method == "closed":
        return 2.0 * spec.gamma0 * spec.omega_c ** 2 * np.exp(-spec.omega_c * tau)
    if method != "quadrature":
        raise ValueError(f"unknown method {method!r}")
    W = spec.omega_max
    pref = 4.0 * spec.gamma0 * spec.omega_c ** 2 / np.pi
    wc2 = spec.omega_c ** 2
    body = _checked_quad(lambda w: pref * w / (w * w + wc2), 0.0, W,
                         weight="sin", wvar=tau, where=f"dissipation_kernel(tau={tau:g})")
    return body + pref * _lorentz_tail(tau, W, spec.omega_c).imag


def damping_closed_form(spec: BathSpec, t: ArrayLike) -> ArrayLike:
    """gamma(t) from the exponential dissipation kernel, integrated exactly."""
    t = np.asarray(t, dtype=float)
    wc, w0 = spec.omega_c, spec.omega0
    decay = np.exp(-wc * t) * (wc * np.sin(w0 * t) + w0 * np.cos(w0 * t))
    out = 2.0 * spec.gamma0 * wc ** 2 * (w0 - decay) / (wc ** 2 + w0 ** 2)
    return float(out) if out.ndim == 0 else out


def markov_rates(spec: BathSpec) -> tuple[float, float]:
    """Long-time plateau values (Delta_inf, gamma_inf) = pi J(w0) (coth(w0/2kT), 1)."""
    pj = np.pi * spectral_density(spec, spec.omega0)
    coth = 1.0 if spec.zero_temperature else 1.0 / np.tanh(spec.omega0 / (2 * spec.kT))
    return pj * coth, pj


@dataclass(frozen=True, eq=False)
class CoefficientTrace:
    """Sampled Delta(t), gamma(t) with cubic interpolation between samples."""

    grid: np.ndarray
    delta: np.ndarray
    gamma: np.ndarray
    spec: Optional[BathSpec] = None

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        if grid.ndim != 1 or grid.size < 2 or np.any(np.diff(grid) <= 0):
            raise ContractError("coefficient grid must be strictly increasing with >= 2 samples")
        if np.shape(self.delta) != grid.shape or np.shape(self.gamma) != grid.shape:
            raise ContractError("delta/gamma must match the grid shape")
        for name, arr in (("grid", grid), ("delta", self.delta), ("gamma", self.gamma)):
            arr = np.array(arr, dtype=float)
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)

    @property
    def t_final(self) -> float:
        return float(self.grid[-1])

    @cached_property
    def _splines(self):
        return CubicSpline(self.grid, self.delta), CubicSpline(self.grid, self.gamma)

    def delta_at(self, t: ArrayLike) -> ArrayLike:
        return self._splines[0](t)

    def gamma_at(self, t: ArrayLike) -> ArrayLike:
        return self._splines[1](t)

    def rates_at(self, t: float) -> tuple[float, float]:
        sd, sg = self._splines
        return float(sd(t)), float(sg(t))

    def covers(self, t_final: float) -> bool:
        return self.grid[0] <= 0.0 and self.grid[-1] >= t_final * (1 - 1e-12)

    def to_csv(self, path, comment: Optional[str] = None) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "delta", "gamma"])
            for row in zip(self.grid, self.delta, self.gamma):
                writer.writerow([format(float(v), ".17g") for v in row])
        return path

    @classmethod
    def from_csv(cls, path) -> "CoefficientTrace":
        with open(path, newline="") as fh:
            rows = [line for line in fh if not line.startswith("#")]
        reader = csv.reader(rows)
        header = next(reader)
        if header != ["t", "delta", "gamma"]:
            raise ContractError(f"unexpected coefficient CSV header {header}")
        data = np.array([[float(v) for v in row] for row in reader])
        return cls(data[:, 0], data[:, 1], data[:, 2])


def coefficient_grid(spec: BathSpec, t_final: float, n_samples: Optional[int] = None) -> np.ndarray:
    """Uniform grid on [0, t_final], refined if needed to honour ``spec.max_spacing``."""
    if not t_final > 0:
        raise ContractError(f"t_final must be positive, got {t_final}")
    n_needed = int(np.ceil(t_final / spec.max_spacing - 1e-9)) + 1
    if n_samples is None:
        n = n_needed
    else:
        if n_samples < 2:
            raise ContractError("n_samples must be at least 2")
        n = max(int(n_samples), n_needed)
    return np.linspace(0.0, t_final, n)


def compute_coefficients(spec: BathSpec, t_final: float, n_samples: Optional[int] = None,
                         mu_method: str = "closed") -> CoefficientTrace:
    """Cumulative Delta(t), gamma(t) on a uniform grid.

    Each grid interval is integrated once (Gauss-Legendre in tau with the
    kernels evaluated by frequency quadrature) and the partial sums are
    accumulated.  The first few intervals sit on the logarithmic singularity
    of k(tau) at tau = 0 and are integrated adaptively instead.

    ``mu_method`` selects the dissipation kernel path ("closed" or
    "quadrature"); both agree to ~1e-9.
    """
    grid = coefficient_grid(spec, t_final, n_samples)
    w0 = spec.omega0
    nodes, weights = np.polynomial.legendre.leggauss(GAUSS_ORDER)

    def k_cos(s):
        return noise_kernel(spec, s) * np.cos(w0 * s)

    def mu_sin(s):
        return dissipation_kernel(spec, s, method=mu_method) * np.sin(w0 * s)

    d_seg = np.empty(grid.size - 1)
    g_seg = np.empty(grid.size - 1)
    for i, (a, b) in enumerate(zip(grid[:-1], grid[1:])):
        half, mid = 0.5 * (b - a), 0.5 * (a + b)
        taus = half * nodes + mid
        if i < ADAPTIVE_SEGMENTS:
            with warnings.catch_warnings():
                warnings.simplefilter("ignore", IntegrationWarning)
                d_seg[i], err = quad(k_cos, a, b, epsabs=1e-14, epsrel=1e-10, limit=200)
            if err > max(1e-6 * abs(d_seg[i]), 1e-12):
                raise QuadratureError(f"segment [{a:g}, {b:g}] did not converge",
                                      achieved=err, where=(a, b))
        else:
            d_seg[i] = half * sum(wt * k_cos(s) for s, wt in zip(taus, weights))
        g_seg[i] = half * sum(wt * mu_sin(s) for s, wt in zip(taus, weights))

    delta = np.concatenate(([0.0], np.cumsum(d_seg)))
    gamma = np.concatenate(([0.0], np.cumsum(g_seg)))
    return CoefficientTrace(grid, delta, gamma, spec)


def constant_trace(delta: float, gamma: float, t_final: float, n_samples: int = 2) -> CoefficientTrace:
    """Frozen rates, for Markovian-limit runs and closed-system checks."""
    grid = np.linspace(0.0, t_final, max(n_samples, 2))
    return CoefficientTrace(grid, np.full(grid.size, float(delta)), np.full(grid.size, float(gamma)))
