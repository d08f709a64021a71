"""Simulation and analysis toolkit for a two-phase phase-locked loop.

The model has a locked state and coexisting stable/unstable rotational
cycles so close together that coarse numerical integration can step over
them and falsely report lock.  This package exposes the phase-domain and
circuit-level models, equilibrium and stability analysis, fixed-step and
adaptive integrators with event detection, Poincare return maps, basin
boundary bisection, and a solver-configuration sweep that demonstrates
the false-lock effect, plus a small CLI (``pllsim``) around all of it.
"""

from .model import (
    CircuitState,
    Equilibrium,
    LoopFilter,
    NonEquilibriumError,
    PhaseState,
    PllParams,
    Stability,
    canonical_params,
    circuit_ode,
    circuit_output,
    circuit_rhs,
    classify_stability,
    equilibria,
    equilibrium_residual,
    make_lead_lag,
    make_params,
    phase_jacobian,
    phase_ode,
    phase_output,
    phase_rhs,
    steady_state_gain,
)
from .solvers import (
    EventCrossing,
    EventDirection,
    EventSpec,
    IntegrationError,
    Method,
    NonFiniteStateError,
    SolverConfig,
    SolverStats,
    StepUnderflowError,
    Trajectory,
    coarse_config,
    convergence_order,
    integrate,
    oracle_config,
    read_csv,
    write_csv,
)

__version__ = "0.1.0"
