"""Three-level Lambda system simulator for modulated two-photon control.

Implements the modulated (dynamically eliminating) drive, its far-detuned
unmodulated baseline, period-averaged effective operators, the exact
adiabatic solution, and a Ramsey-interferometry analysis pipeline.
"""

from .core import (
    KET_0,
    KET_M1,
    KET_P1,
    Operator3,
    StateVector,
    expm_hermitian,
    overlap,
)
from .dynamics import (
    SystemParams,
    Trajectory,
    analytic_propagator,
    analytic_state,
    analytic_trajectory,
    exact_effective_area,
    exact_effective_rabi,
    free_evolution,
    hamiltonian_at,
    magnus_h1,
    magnus_h2,
    magnus_numeric,
    modulation_for_exact_area,
    propagate,
    propagate_unitary,
)
from .errors import (
    ConvergenceError,
    DegenerateFringeError,
    NoWindowError,
    UnsupportedSchemeError,
    ValidationError,
)
from .pulses import (
    PulseSpec,
    Scheme,
    effective_area,
    envelope_area,
    four_pulse_unitary,
    gaussian_envelope,
    modulation_for_effective_area,
    rabi_pair,
)

__version__ = "0.1.0"
