"""Wootters concurrence and detection of entanglement sudden death / birth."""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np

from .errors import ContractError

DEFAULT_THRESHOLD = 1e-6
BISECTION_TOL = 1e-4

_SYSY = np.kron(np.array([[0, -1j], [1j, 0]]), np.array([[0, -1j], [1j, 0]]))


def concurrence_general(rho: np.ndarray) -> float:
    """Concurrence of a two-qubit density matrix.

    The lambda_i are the eigenvalues of rho (sy x sy) rho* (sy x sy),
    obtained through the Hermitian matrix sqrt(rho) (sy x sy) rho* (sy x sy) sqrt(rho)
    which has the same spectrum.
    """
    rho = np.asarray(rho, dtype=complex)
    if rho.shape != (4, 4):
        raise ContractError("expected a 4x4 density matrix")
    if np.max(np.abs(rho - rho.conj().T)) > 1e-8:
        raise ContractError("density matrix is not Hermitian")
    if abs(np.trace(rho).real - 1.0) > 1e-8:
        raise ContractError(f"density matrix trace {np.trace(rho).real:.12g} != 1")
    rho = 0.5 * (rho + rho.conj().T)
    w, v = np.linalg.eigh(rho)
    sqrt_rho = (v * np.sqrt(np.clip(w, 0.0, None))) @ v.conj().T
    flipped = _SYSY @ rho.conj() @ _SYSY
    R = sqrt_rho @ flipped @ sqrt_rho
    lam = np.linalg.eigvalsh(0.5 * (R + R.conj().T))[::-1]
    if lam[-1] < -1e-12:
        raise ContractError(f"spin-flip spectrum has negative eigenvalue {lam[-1]:.3g}")
    lam = np.clip(lam, 0.0, None)
    s = np.sqrt(lam)
    return float(max(0.0, s[0] - s[1] - s[2] - s[3]))


def concurrence_x(state) -> float:
    """C = 2 max(0, K1, K2) for an X state (XState or length-8 array a..n).

    Products a*d and b*c that dip below zero through transient positivity
    loss are treated as 0 under the square root.
    """
    a, b, c, d, e, f, m, n = state.as_array() if hasattr(state, "as_array") else state
    k1 = np.sqrt(e * e + f * f) - np.sqrt(max(a * d, 0.0))
    k2 = np.sqrt(m * m + n * n) - np.sqrt(max(b * c, 0.0))
    return float(2.0 * max(0.0, k1, k2))


def concurrence_x_array(states: np.ndarray) -> np.ndarray:
    """Vectorised concurrence_x over rows of an (N, 8) array."""
    s = np.asarray(states, dtype=float)
    a, b, c, d, e, f, m, n = s.T
    k1 = np.hypot(e, f) - np.sqrt(np.maximum(a * d, 0.0))
    k2 = np.hypot(m, n) - np.sqrt(np.maximum(b * c, 0.0))
    return 2.0 * np.maximum(0.0, np.maximum(k1, k2))


@dataclass(frozen=True, eq=False)
class EntanglementTrace:
    grid: np.ndarray
    concurrence: np.ndarray

    def __post_init__(self):
        grid = np.asarray(self.grid, dtype=float)
        conc = np.asarray(self.concurrence, dtype=float)
        if grid.shape != conc.shape or grid.ndim != 1:
            raise ContractError("grid and concurrence must be 1-D arrays of equal length")
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "concurrence", conc)

    @classmethod
    def from_trajectory(cls, traj) -> "EntanglementTrace":
        return cls(traj.grid, concurrence_x_array(traj.states))

    def half_life(self) -> Optional[float]:
        """Last time the concurrence is at or above half its initial value.

        Returns None if it never falls below that level on the grid.
        """
        level = 0.5 * self.concurrence[0]
        above = np.nonzero(self.concurrence >= level)[0]
        if above[-1] == self.grid.size - 1:
            return None
        return float(self.grid[above[-1]])

    def oscillation_amplitude(self) -> float:
        """Largest drop from an interior local maximum to the lowest value
        before the next one.

        The initial decay from t = 0 is not an oscillation and is excluded;
        a trace with no interior maximum has amplitude 0.
        """
        c = self.concurrence
        if c.size < 3:
            return 0.0
        peaks = np.nonzero((c[1:-1] > c[:-2]) & (c[1:-1] >= c[2:]))[0] + 1
        best = 0.0
        for k, p in enumerate(peaks):
            end = peaks[k + 1] if k + 1 < peaks.size else c.size
            best = max(best, float(c[p] - c[p:end].min()))
        return best

    def to_csv(self, path, comment: Optional[str] = None) -> Path:
        path = Path(path)
        with open(path, "w", newline="") as fh:
            if comment:
                fh.write(f"# {comment}\n")
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["t", "concurrence"])
            for t, v in zip(self.grid, self.concurrence):
                writer.writerow([format(float(t), ".17g"), format(float(v), ".17g")])
        return path

    @classmethod
    def from_csv(cls, path) -> "EntanglementTrace":
        with open(path, newline="") as fh:
            rows = [line for line in fh if not line.startswith("#")]
        reader = csv.reader(rows)
        if next(reader) != ["t", "concurrence"]:
            raise ContractError(f"{path}: unexpected concurrence CSV header")
        data = np.array([[float(v) for v in row] for row in reader])
        return cls(data[:, 0], data[:, 1])


@dataclass(frozen=True)
class EsdEvent:
    kind: str  # "death" or "birth"
    time: float
    refined: bool = True


def _bisect(func, lo, hi, level, rising, tol):
    # func(lo) is on the old side of the level, func(hi) on the new side
    while hi - lo > tol:
        mid = 0.5 * (lo + hi)
        above = func(mid) >= level
        if above == rising:
            hi = mid
        else:
            lo = mid
    return 0.5 * (lo + hi)


def detect_events(trace: EntanglementTrace, threshold: float = DEFAULT_THRESHOLD,
                  func: Optional[Callable[[float], float]] = None,
                  tol: float = BISECTION_TOL) -> List[EsdEvent]:
    """Entanglement sudden death and birth times.

    A death is recorded when the concurrence drops below ``threshold`` after
    being above it, a birth when it rises back above after a death.  A trace
    that starts below the threshold counts as already dead.  Crossings are
    refined by bisection on ``func`` if given, otherwise on the linear
    interpolant of the samples.  The grid must be fine enough that no
    death/birth pair fits between two samples.
    """
    grid, conc = trace.grid, trace.concurrence
    if grid.size and np.any(np.diff(grid) <= 0):
        raise ContractError("concurrence grid must be strictly increasing")
    if func is None:
        def func(t):
            return float(np.interp(t, grid, conc))
    events: List[EsdEvent] = []
    if grid.size == 0:
        return events
    alive = conc[0] >= threshold
    for i in range(1, grid.size):
        now = conc[i] >= threshold
        if now == alive:
            continue
        t = _bisect(func, grid[i - 1], grid[i], threshold, rising=now, tol=tol)
        events.append(EsdEvent("birth" if now else "death", t, True))
        alive = now
    return events


def write_events_csv(events: List[EsdEvent], path, comment: Optional[str] = None) -> Path:
    path = Path(path)
    with open(path, "w", newline="") as fh:
        if comment:
            fh.write(f"# {comment}\n")
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["kind", "time"])
        for ev in events:
            writer.writerow([ev.kind, format(ev.time, ".17g")])
    return path


def read_events_csv(path) -> List[EsdEvent]:
    with open(path, newline="") as fh:
        rows = [line for line in fh if not line.startswith("#")]
    reader = csv.reader(rows)
    if next(reader) != ["kind", "time"]:
        raise ContractError(f"{path}: unexpected events CSV header")
    return [EsdEvent(kind, float(t)) for kind, t in reader]
