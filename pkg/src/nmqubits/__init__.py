"""Non-Markovian entanglement dynamics of two coupled superconducting charge qubits."""

from .bath import (BathSpec, CoefficientTrace, compute_coefficients, damping_closed_form,
                   dissipation_kernel, markov_rates, noise_kernel, spectral_density)
from .dynamics import (QubitPair, Trajectory, XState, derivative, evolve,
                       full_lindblad_oracle)
from .entanglement import (EntanglementTrace, EsdEvent, concurrence_general, concurrence_x,
                           detect_events)
from .errors import (ConfigError, ContractError, NumericalError, QuadratureError,
                     StiffnessError)
from .harness import ExperimentConfig, SweepResult, emit_plots, run_sweep, summarize_events
from .preparation import PreparationPlan, bell_initial_xstate, evolve_closed

__version__ = "0.1.0"
