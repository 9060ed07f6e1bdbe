"""Closed-system exchange evolution that prepares the Bell initial state."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

from .dynamics import XState
from .errors import ContractError

# basis order |ee>, |eg>, |ge>, |gg>
EE, EG, GE, GG = 0, 1, 2, 3


def basis_state(label: str) -> np.ndarray:
    """Computational basis ket from a label such as "ge" (qubit 1 first)."""
    index = {"ee": EE, "eg": EG, "ge": GE, "gg": GG}[label]
    psi = np.zeros(4, dtype=complex)
    psi[index] = 1.0
    return psi


@dataclass(frozen=True)
class PreparationPlan:
    """Exchange pulse of strength ``j_coupling`` lasting ``duration``.

    The default duration gives J t = pi/4.  ``omega_b`` is the bus frequency;
    the bus stays in its ground state and only contributes a global phase.
    """

    j_coupling: float
    duration: Optional[float] = None
    omega_b: float = 0.0

    def __post_init__(self):
        if self.duration is None:
            if self.j_coupling == 0:
                raise ContractError("a zero coupling needs an explicit duration")
            object.__setattr__(self, "duration", np.pi / (4.0 * abs(self.j_coupling)))
        if not self.duration > 0:
            raise ContractError(f"duration must be positive, got {self.duration}")

    @property
    def bus_phase(self) -> complex:
        return np.exp(1j * self.omega_b * self.duration)


def evolve_closed(initial: np.ndarray, plan: PreparationPlan) -> np.ndarray:
    """Apply exp[-i J t (s+_1 s-_2 + s+_2 s-_1)] to a two-qubit ket.

    Inside the {|eg>, |ge>} block this is cos(Jt) on the diagonal and
    -i sin(Jt) off it; |ee> and |gg> are untouched.  The bus phase is global
    and dropped.
    """
    psi = np.asarray(initial, dtype=complex)
    if psi.shape != (4,):
        raise ContractError("expected a length-4 two-qubit ket")
    if abs(np.vdot(psi, psi).real - 1.0) > 1e-10:
        raise ContractError("initial ket is not normalized")
    theta = plan.j_coupling * plan.duration
    cs, sn = np.cos(theta), np.sin(theta)
    out = psi.copy()
    out[EG] = cs * psi[EG] - 1j * sn * psi[GE]
    out[GE] = cs * psi[GE] - 1j * sn * psi[EG]
    return out


def ket_to_xstate(psi: np.ndarray) -> XState:
    rho = np.outer(psi, np.conj(psi))
    return XState.from_density_matrix(rho)


def bell_initial_xstate() -> XState:
    """(|ge> - i|eg>)/sqrt(2) as an X state: b = c = 1/2, f = -1/2."""
    return XState(a=0.0, b=0.5, c=0.5, d=0.0, e=0.0, f=-0.5, m=0.0, n=0.0)
