"""X-state master-equation dynamics of two exchange-coupled qubits.

Basis order is |ee>, |eg>, |ge>, |gg> (qubit 1 first).  An X state is

    [[a,      0,      0,      m + i n],
     [0,      b,      e + i f, 0     ],
     [0,      e - i f, c,      0     ],
     [m - i n, 0,     0,      d     ]]

so ``e + i f = <eg|rho|ge>`` and ``m + i n = <ee|rho|gg>``.  The qubit
Hamiltonian is sum_k (E_Jk / 2) sz_k + J (s+_1 s-_2 + s+_2 s-_1), with
sz|e> = +|e>, and each qubit decays through s- at rate Delta + gamma and is
excited through s+ at rate Delta - gamma.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from functools import lru_cache
from pathlib import Path
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp

from .bath import CoefficientTrace
from .errors import ContractError, NumericalError, StiffnessError

EPS_POS = 1e-8
XSTATE_FIELDS = ("a", "b", "c", "d", "e", "f", "m", "n")


@dataclass(frozen=True)
class QubitPair:
    """Josephson energies and exchange coupling of the two charge qubits."""

    ej1: float
    ej2: float
    j_coupling: float
    ej0: Optional[float] = None
    phi1: Optional[float] = None
    phi2: Optional[float] = None

    @classmethod
    def from_fluxes(cls, phi1: float, phi2: float, ej0: float = 1.0,
                    ec: Optional[float] = None, j_coupling: Optional[float] = None,
                    phi0: float = 1.0) -> "QubitPair":
        """Flux-tuned pair: E_Jk = 2 E_J0 cos(pi phi_k / phi0).

        The exchange coupling is J = lambda_1 lambda_2 / E_c with
        lambda_k = 2 E_J0 sin(phi_k / 2) when ``ec`` is given; otherwise
        ``j_coupling`` must be supplied.
        """
        ej1 = 2.0 * ej0 * np.cos(np.pi * phi1 / phi0)
        ej2 = 2.0 * ej0 * np.cos(np.pi * phi2 / phi0)
        if ec is not None:
            lam1 = 2.0 * ej0 * np.sin(phi1 / 2.0)
            lam2 = 2.0 * ej0 * np.sin(phi2 / 2.0)
            j = lam1 * lam2 / ec
        elif j_coupling is not None:
            j = j_coupling
        else:
            raise ContractError("either ec or j_coupling is required")
        return cls(ej1=float(ej1), ej2=float(ej2), j_coupling=float(j),
                   ej0=ej0, phi1=phi1, phi2=phi2)

    @classmethod
    def regime(cls, splitting: float, ej0: float = 1.0, j_coupling: float = 0.5) -> "QubitPair":
        """Pair with |E_J1 - E_J2| = splitting * E_J0, E_J1 held at 2 E_J0.

        splitting = 0 is both qubits at zero flux; splitting = 4 puts the
        second qubit at one flux quantum (E_J2 = -2 E_J0).
        """
        return cls(ej1=2.0 * ej0, ej2=2.0 * ej0 - splitting * ej0,
                   j_coupling=j_coupling, ej0=ej0)


@dataclass(frozen=True)
class XState:
    a: float
    b: float
    c: float
    d: float
    e: float = 0.0
    f: float = 0.0
    m: float = 0.0
    n: float = 0.0

    def as_array(self) -> np.ndarray:
        return np.array([self.a, self.b, self.c, self.d, self.e, self.f, self.m, self.n])

    @classmethod
    def from_array(cls, y) -> "XState":
        return cls(*(float(v) for v in y))

    @property
    def trace(self) -> float:
        return self.a + self.b + self.c + self.d

    def density_matrix(self) -> np.ndarray:
        return x_density_matrix(self.as_array())

    @classmethod
    def from_density_matrix(cls, rho: np.ndarray) -> "XState":
        """Project a 4x4 matrix onto its X entries (other entries are dropped)."""
        rho = np.asarray(rho)
        return cls(rho[0, 0].real, rho[1, 1].real, rho[2, 2].real, rho[3, 3].real,
                   rho[1, 2].real, rho[1, 2].imag, rho[0, 3].real, rho[0, 3].imag)

    def eigenvalues(self) -> np.ndarray:
        return x_eigenvalues(self.as_array())

    def is_physical(self, eps: float = EPS_POS) -> bool:
        a, b, c, d, e, f, m, n = self.as_array()
        return (min(a, b, c, d) >= -eps
                and e * e + f * f <= b * c + eps
                and m * m + n * n <= a * d + eps)


def x_density_matrix(y) -> np.ndarray:
    a, b, c, d, e, f, m, n = y
    rho = np.zeros((4, 4), dtype=complex)
    rho[0, 0], rho[1, 1], rho[2, 2], rho[3, 3] = a, b, c, d
    rho[1, 2] = e + 1j * f
    rho[2, 1] = e - 1j * f
    rho[0, 3] = m + 1j * n
    rho[3, 0] = m - 1j * n
    return rho


def x_eigenvalues(y) -> np.ndarray:
    """Eigenvalues of X states, closed form per 2x2 block; accepts (..., 8) arrays."""
    y = np.asarray(y, dtype=float)
    a, b, c, d, e, f, m, n = np.moveaxis(y, -1, 0)
    outer = np.sqrt(0.25 * (a - d) ** 2 + m * m + n * n)
    inner = np.sqrt(0.25 * (b - c) ** 2 + e * e + f * f)
    return np.stack([0.5 * (a + d) - outer, 0.5 * (a + d) + outer,
                     0.5 * (b + c) - inner, 0.5 * (b + c) + inner], axis=-1)


def _rhs(y, s, dsum, j, delta, gamma):
    a, b, c, d, e, f, m, n = y
    g1 = delta + gamma
    g2 = delta - gamma
    return np.array([
        -2.0 * g1 * a + g2 * (b + c),
        g1 * a - 2.0 * delta * b + g2 * d - 2.0 * j * f,
        g1 * a - 2.0 * delta * c + g2 * d + 2.0 * j * f,
        g1 * (b + c) - 2.0 * g2 * d,
        -2.0 * delta * e + dsum * f,
        -2.0 * delta * f - dsum * e + j * (b - c),
        -2.0 * delta * m + s * n,
        -2.0 * delta * n - s * m,
    ])


def derivative(state: XState, qubits: QubitPair, delta: float, gamma: float) -> XState:
    """Right-hand side of the population/coherence equations, as a tangent XState."""
    y = state.as_array()
    out = _rhs(y, qubits.ej1 + qubits.ej2, qubits.ej1 - qubits.ej2,
               qubits.j_coupling, delta, gamma)
    return XState.from_array(out)


@dataclass(frozen=True, eq=False)
class Trajectory:
    grid: np.ndarray
    states: np.ndarray  # shape (len(grid), 8), columns a..n
    coefficients: Optional[CoefficientTrace] = field(default=None, repr=False)
    min_eigenvalue: float = 0.0
    nfev: int = 0

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        states = np.asarray(self.states, dtype=float)
        if np.any(np.diff(grid) <= 0):
            raise ContractError("trajectory grid must be strictly increasing")
        if states.shape != (grid.size, 8):
            raise ContractError(f"states shape {states.shape} does not match grid")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "states", states)

    def __len__(self):
        return self.grid.size

    def __getitem__(self, i) -> XState:
        return XState.from_array(self.states[i])

    def column(self, name: str) -> np.ndarray:
        return self.states[:, XSTATE_FIELDS.index(name)]

    @property
    def trace_error(self) -> float:
        return float(np.max(np.abs(self.states[:, :4].sum(axis=1) - 1.0)))

    def to_csv(self, path, comment: Optional[str] = None) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(("t",) + XSTATE_FIELDS)
            for t, row in zip(self.grid, self.states):
                writer.writerow([format(float(t), ".17g")] + [format(float(v), ".17g") for v in row])
        return path


def output_grid(t_final: float, dt_out: float) -> np.ndarray:
    n = max(int(round(t_final / dt_out)), 1)
    return np.linspace(0.0, t_final, n + 1)


def _rk4(fun, t_out, y0, substeps):
    ys = np.empty((t_out.size, y0.size))
    ys[0] = y = y0
    nfev = 0
    for i in range(t_out.size - 1):
        t0 = t_out[i]
        h = (t_out[i + 1] - t0) / substeps
        for k in range(substeps):
            t = t0 + k * h
            k1 = fun(t, y)
            k2 = fun(t + 0.5 * h, y + 0.5 * h * k1)
            k3 = fun(t + 0.5 * h, y + 0.5 * h * k2)
            k4 = fun(t + h, y + h * k3)
            y = y + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
            nfev += 4
        ys[i + 1] = y
    return ys, nfev


def _check_inputs(coeffs: CoefficientTrace, t_final: float):
    if not t_final > 0:
        raise ContractError(f"t_final must be positive, got {t_final}")
    if not coeffs.covers(t_final):
        raise ContractError(
            f"coefficient trace covers [{coeffs.grid[0]:g}, {coeffs.t_final:g}], "
            f"shorter than t_final={t_final:g}")


def evolve(initial: XState, qubits: QubitPair, coeffs: CoefficientTrace, t_final: float,
           tol: float = 1e-10, rtol: Optional[float] = None, dt_out: float = 0.01,
           fixed_step: Optional[float] = None, strict: bool = True) -> Trajectory:
    """Integrate the X-state equations with Delta(t), gamma(t) from ``coeffs``.

    Adaptive mode uses the Dormand-Prince 5(4) pair with absolute tolerance
    ``tol`` and relative tolerance ``rtol`` (default ``100 * tol``).  Passing
    ``fixed_step`` switches to classical RK4 with at most that step size,
    which is bit-reproducible.  States are reported on a uniform grid of
    spacing ``dt_out``.

    The trace drift over the output samples is stored on the trajectory.
    With ``strict`` a drift of 10 * tol or more raises NumericalError; this
    happens only when negative rates inflate the state far outside the
    physical range and roundoff on huge entries swamps the trace.
    """
    if not initial.is_physical():
        raise ContractError(f"initial state is not a physical X state: {initial}")
    _check_inputs(coeffs, t_final)
    s = qubits.ej1 + qubits.ej2
    dsum = qubits.ej1 - qubits.ej2
    j = qubits.j_coupling
    delta_at, gamma_at = coeffs.delta_at, coeffs.gamma_at

    def fun(t, y):
        return _rhs(y, s, dsum, j, float(delta_at(t)), float(gamma_at(t)))

    t_out = output_grid(t_final, dt_out)
    y0 = initial.as_array()
    if fixed_step is not None:
        if not fixed_step > 0:
            raise ContractError("fixed_step must be positive")
        substeps = max(int(np.ceil((t_out[1] - t_out[0]) / fixed_step - 1e-12)), 1)
        ys, nfev = _rk4(fun, t_out, y0, substeps)
    else:
        sol = solve_ivp(fun, (0.0, t_final), y0, method="RK45", t_eval=t_out,
                        atol=tol, rtol=100.0 * tol if rtol is None else rtol)
        if sol.status != 0:
            reached = float(sol.t[-1]) if sol.t.size else 0.0
            raise StiffnessError(f"integration stopped at t={reached:g}: {sol.message}",
                                 t_reached=reached)
        ys, nfev = sol.y.T, sol.nfev

    if not np.all(np.isfinite(ys)):
        raise NumericalError("state overflowed to non-finite values")
    drift = float(np.max(np.abs(ys[:, :4].sum(axis=1) - y0[:4].sum())))
    if strict and drift >= 10.0 * tol:
        raise NumericalError(f"trace drift {drift:.3g} exceeds 10*tol "
                             f"(max |entry| {np.max(np.abs(ys)):.3g})")
    min_eig = float(np.min(x_eigenvalues(ys)))
    return Trajectory(t_out, ys, coeffs, min_eigenvalue=min_eig, nfev=nfev)


# full 4x4 master equation, used as an independent oracle

_SX = np.array([[0, 1], [1, 0]], dtype=complex)
_SY = np.array([[0, -1j], [1j, 0]], dtype=complex)
_SZ = np.array([[1, 0], [0, -1]], dtype=complex)
_SPLUS = np.array([[0, 1], [0, 0]], dtype=complex)   # |e><g| with |e> first
_SMINUS = _SPLUS.T.copy()
_I2 = np.eye(2, dtype=complex)


def _two(op1, op2):
    return np.kron(op1, op2)


@lru_cache(maxsize=None)
def _pauli_basis():
    singles = (_I2, _SX, _SY, _SZ)
    return np.array([np.kron(p, q) for p in singles for q in singles])


def _superoperator_real(generator):
    """Real 16x16 matrix M with dc/dt = M c for rho = sum_k c_k P_k / 4."""
    basis = _pauli_basis()
    images = [generator(p) for p in basis]
    return np.array([[np.trace(bm @ img).real / 4.0 for img in images] for bm in basis])


def _dissipator(L):
    Ld = L.conj().T
    LdL = Ld @ L
    return lambda r: L @ r @ Ld - 0.5 * (LdL @ r + r @ LdL)


def qubit_hamiltonian(qubits: QubitPair) -> np.ndarray:
    return (0.5 * qubits.ej1 * _two(_SZ, _I2) + 0.5 * qubits.ej2 * _two(_I2, _SZ)
            + qubits.j_coupling * (_two(_SPLUS, _SMINUS) + _two(_SMINUS, _SPLUS)))


@lru_cache(maxsize=None)
def _channel_generators():
    down = [_dissipator(_two(_SMINUS, _I2)), _dissipator(_two(_I2, _SMINUS))]
    up = [_dissipator(_two(_SPLUS, _I2)), _dissipator(_two(_I2, _SPLUS))]
    m_down = _superoperator_real(lambda r: down[0](r) + down[1](r))
    m_up = _superoperator_real(lambda r: up[0](r) + up[1](r))
    return m_down, m_up


def liouvillian_parts(qubits: QubitPair):
    """(M_H, M_down, M_up) in the real Pauli basis; M = M_H + G1 M_down + G2 M_up."""
    H = qubit_hamiltonian(qubits)
    m_h = _superoperator_real(lambda r: -1j * (H @ r - r @ H))
    m_down, m_up = _channel_generators()
    return m_h, m_down, m_up


def rho_to_pauli(rho: np.ndarray) -> np.ndarray:
    return np.array([np.trace(p @ rho).real for p in _pauli_basis()])


def pauli_to_rho(c: np.ndarray) -> np.ndarray:
    return np.tensordot(c, _pauli_basis(), axes=(0, 0)) / 4.0


def full_lindblad_oracle(initial: np.ndarray, qubits: QubitPair, coeffs: CoefficientTrace,
                         t_final: float, dt_out: float = 0.01, rtol: float = 1e-12,
                         atol: float = 1e-13):
    """Integrate the full two-qubit master equation; returns (grid, rhos[n, 4, 4]).

    The state is carried as 16 real Pauli components, so every returned
    density matrix is Hermitian by construction.
    """
    rho0 = np.asarray(initial, dtype=complex)
    if rho0.shape != (4, 4):
        raise ContractError("initial density matrix must be 4x4")
    if np.max(np.abs(rho0 - rho0.conj().T)) > 1e-12:
        raise ContractError("initial density matrix is not Hermitian")
    if abs(np.trace(rho0).real - 1.0) > 1e-8:
        raise ContractError("initial density matrix does not have unit trace")
    _check_inputs(coeffs, t_final)
    m_h, m_down, m_up = liouvillian_parts(qubits)

    def fun(t, c):
        dl, gm = coeffs.rates_at(t)
        return (m_h + (dl + gm) * m_down + (dl - gm) * m_up) @ c

    t_out = output_grid(t_final, dt_out)
    sol = solve_ivp(fun, (0.0, t_final), rho_to_pauli(rho0), method="DOP853",
                    t_eval=t_out, rtol=rtol, atol=atol)
    if sol.status != 0:
        reached = float(sol.t[-1]) if sol.t.size else 0.0
        raise StiffnessError(f"oracle integration stopped at t={reached:g}: {sol.message}",
                             t_reached=reached)
    rhos = np.array([pauli_to_rho(c) for c in sol.y.T])
    return t_out, rhos
