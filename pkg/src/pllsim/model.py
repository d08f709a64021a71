"""Phase-domain and circuit-level models of a two-phase PLL.

The loop under study: a quadrature (sin/cos) reference drives a complex
multiplier phase detector, so the detector output is ripple-free,

    phi = (1/2) * sin(theta1 - theta2),

a first-order lead-lag filter shapes phi into the VCO control signal g,
and the VCO integrates ``omega_free + L * g``.  Two mathematically
equivalent state formulations are provided:

* the phase model in ``(x, theta_delta)`` with ``theta_delta = theta1 - theta2``
  (autonomous, the one used for equilibria and long-run analysis), and
* the circuit model in ``(x, theta2)`` driven by the explicit reference
  phase ``theta1 = omega1 * t`` (non-autonomous, kept deliberately
  un-simplified so the equivalence is a checkable property, not an input).

All functions here are pure; the dataclasses are frozen value types.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np

__all__ = [
    "LoopFilter",
    "PllParams",
    "PhaseState",
    "CircuitState",
    "Stability",
    "Equilibrium",
    "NonEquilibriumError",
    "make_lead_lag",
    "steady_state_gain",
    "make_params",
    "canonical_params",
    "phase_rhs",
    "circuit_rhs",
    "phase_ode",
    "circuit_ode",
    "phase_output",
    "circuit_output",
    "phase_jacobian",
    "equilibrium_residual",
    "equilibria",
    "classify_stability",
]


@dataclass(frozen=True)
class LoopFilter:
    """State-space realization (a, b, c, h) of a first-order loop filter.

    Realizes ``H(s) = (1 + s*tau2) / (1 + s*(tau1 + tau2))`` as

        dx/dt = a*x + b*u,    y = c*x + h*u,

    with ``a = -1/(tau1+tau2)``, ``b = 1 - tau2/(tau1+tau2)``,
    ``c = 1/(tau1+tau2)``, ``h = tau2/(tau1+tau2)``.  The DC gain
    ``c*(-1/a)*b + h`` equals 1 by construction.
    """

    tau1: float
    tau2: float
    a: float
    b: float
    c: float
    h: float


def make_lead_lag(tau1: float, tau2: float) -> LoopFilter:
    """Build the lead-lag filter realization from its two time constants.

    Parameters
    ----------
    tau1 : float
        Lag time constant, seconds, > 0.
    tau2 : float
        Lead time constant, seconds, >= 0 (0 gives a pure first-order lag).

    Raises
    ------
    ValueError
        If ``tau1 <= 0``, ``tau2 < 0`` or ``tau1 + tau2 <= 0``.
    """
    if not (math.isfinite(tau1) and math.isfinite(tau2)):
        raise ValueError("filter time constants must be finite")
    if tau1 <= 0.0:
        raise ValueError(f"tau1 must be > 0, got {tau1}")
    if tau2 < 0.0:
        raise ValueError(f"tau2 must be >= 0, got {tau2}")
    tau = tau1 + tau2
    if tau <= 0.0:
        raise ValueError(f"tau1 + tau2 must be > 0, got {tau}")
    return LoopFilter(
        tau1=tau1,
        tau2=tau2,
        a=-1.0 / tau,
        b=1.0 - tau2 / tau,
        c=1.0 / tau,
        h=tau2 / tau,
    )


def steady_state_gain(filt: LoopFilter) -> float:
    """DC gain ``c*(-1/a)*b + h`` of the realization (1 for a lead-lag)."""
    return filt.c * (-1.0 / filt.a) * filt.b + filt.h


@dataclass(frozen=True)
class PllParams:
    """Loop constants: filter realization, VCO gain and the two frequencies.

    ``omega1`` is the reference frequency and ``omega_free`` the VCO
    free-running frequency, both in rad/s.  The detuning
    ``omega_delta = omega1 - omega_free`` is derived, never stored, so the
    defining identity holds exactly.
    """

    filter: LoopFilter
    vco_gain: float
    omega1: float
    omega_free: float

    @property
    def omega_delta(self) -> float:
        return self.omega1 - self.omega_free


def make_params(
    filt: LoopFilter, vco_gain: float, omega1: float, omega_free: float
) -> PllParams:
    """Validate and assemble loop parameters (``vco_gain`` must be > 0)."""
    if not (vco_gain > 0.0 and math.isfinite(vco_gain)):
        raise ValueError(f"vco_gain must be finite and > 0, got {vco_gain}")
    if not (math.isfinite(omega1) and math.isfinite(omega_free)):
        raise ValueError("frequencies must be finite")
    return PllParams(
        filter=filt, vco_gain=vco_gain, omega1=omega1, omega_free=omega_free
    )


def canonical_params() -> PllParams:
    """Reference parameter set used throughout the test suite and demos.

    Lead-lag filter tau1 = 0.0448 s, tau2 = 0.0185 s, VCO gain L = 500,
    reference frequency 10000 rad/s, free-running frequency 9821.1 rad/s
    (detuning 178.9 rad/s).
    """
    return make_params(
        make_lead_lag(0.0448, 0.0185),
        vco_gain=500.0,
        omega1=10000.0,
        omega_free=10000.0 - 178.9,
    )


@dataclass(frozen=True)
class PhaseState:
    """Phase-model state: filter state x (V), phase error theta_delta (rad).

    ``theta_delta`` is kept unwrapped so winding counts stay observable;
    reduction mod 2*pi happens only inside lock-distance computations.
    """

    x: float
    theta_delta: float
    t: float = 0.0


@dataclass(frozen=True)
class CircuitState:
    """Circuit-model state: filter state x (V), VCO phase theta2 (rad)."""

    x: float
    theta2: float
    t: float = 0.0


def phase_rhs(state: PhaseState, p: PllParams) -> tuple[float, float]:
    """Time derivative of the phase model.

    Returns ``(dx/dt, dtheta_delta/dt)`` with

        dx/dt          = a*x + b * (1/2) * sin(theta_delta)
        dtheta_delta/dt = omega_delta - L*c*x - h*(L/2) * sin(theta_delta)

    The detector gain 1/2 is baked in here (and in :func:`circuit_rhs`);
    it is never applied a second time anywhere else.
    """
    f = p.filter
    s = math.sin(state.theta_delta)
    dx = f.a * state.x + f.b * 0.5 * s
    dtheta = p.omega_delta - p.vco_gain * f.c * state.x - f.h * (p.vco_gain / 2.0) * s
    return dx, dtheta


def circuit_rhs(state: CircuitState, p: PllParams) -> tuple[float, float]:
    """Time derivative of the circuit-level model.

    The detector output is formed from the four explicit quadrature
    signals, *not* pre-collapsed through the angle-difference identity:

        phi = (1/2) * (sin(theta1)*cos(theta2) - cos(theta1)*sin(theta2))

    with ``theta1 = omega1 * t``.  Then ``g = c*x + h*phi`` and
    ``dtheta2/dt = omega_free + L*g``.
    """
    f = p.filter
    theta1 = p.omega1 * state.t
    s1, c1 = math.sin(theta1), math.cos(theta1)
    s2, c2 = math.sin(state.theta2), math.cos(state.theta2)
    phi = 0.5 * (s1 * c2 - c1 * s2)
    g = f.c * state.x + f.h * phi
    dx = f.a * state.x + f.b * phi
    dtheta2 = p.omega_free + p.vco_gain * g
    return dx, dtheta2


def phase_ode(p: PllParams):
    """Phase-model RHS as ``f(t, y) -> ndarray`` for the integrators."""
    a, b = p.filter.a, p.filter.b
    wd, lc, lh2 = p.omega_delta, p.vco_gain * p.filter.c, p.filter.h * p.vco_gain / 2.0
    sin = math.sin

    def rhs(t, y):
        s = sin(y[1])
        return np.array([a * y[0] + b * 0.5 * s, wd - lc * y[0] - lh2 * s])

    return rhs


def circuit_ode(p: PllParams):
    """Circuit-model RHS as ``f(t, y) -> ndarray`` for the integrators."""
    a, b, c, h = p.filter.a, p.filter.b, p.filter.c, p.filter.h
    w1, wf, gain = p.omega1, p.omega_free, p.vco_gain
    sin, cos = math.sin, math.cos

    def rhs(t, y):
        theta1 = w1 * t
        phi = 0.5 * (sin(theta1) * cos(y[1]) - cos(theta1) * sin(y[1]))
        return np.array([a * y[0] + b * phi, wf + gain * (c * y[0] + h * phi)])

    return rhs


def phase_output(p: PllParams):
    """Filter output ``g(t, y)`` along phase-model trajectories."""
    c, h = p.filter.c, p.filter.h

    def out(t, y):
        return c * y[0] + h * 0.5 * math.sin(y[1])

    return out


def circuit_output(p: PllParams):
    """Filter output ``g(t, y)`` along circuit-model trajectories."""
    c, h = p.filter.c, p.filter.h
    w1 = p.omega1

    def out(t, y):
        theta1 = w1 * t
        phi = 0.5 * (
            math.sin(theta1) * math.cos(y[1]) - math.cos(theta1) * math.sin(y[1])
        )
        return c * y[0] + h * phi

    return out


def phase_jacobian(x: float, theta: float, p: PllParams) -> np.ndarray:
    """Analytic 2x2 Jacobian of the phase model at ``(x, theta)``."""
    f = p.filter
    ct = math.cos(theta)
    return np.array(
        [
            [f.a, f.b * 0.5 * ct],
            [-p.vco_gain * f.c, -f.h * (p.vco_gain / 2.0) * ct],
        ]
    )


def _residual_scales(p: PllParams) -> tuple[float, float]:
    # Characteristic magnitudes of the two RHS components; used so residual
    # tolerances mean the same thing for the volt-scale and rad/s-scale rows.
    f = p.filter
    sx = max(abs(f.a) * f.tau1 / 2.0, f.b / 2.0)
    st = max(abs(p.omega_delta), p.vco_gain / 2.0)
    return sx, st


def equilibrium_residual(x: float, theta: float, p: PllParams) -> float:
    """Scaled norm of the phase-model RHS at ``(x, theta)``.

    Each component is divided by its characteristic magnitude, so a value
    of 1e-10 means "stationary to ten digits" regardless of units.
    """
    dx, dtheta = phase_rhs(PhaseState(x=x, theta_delta=theta), p)
    sx, st = _residual_scales(p)
    return math.hypot(dx / sx, dtheta / st)


class Stability(enum.Enum):
    """Local character of an equilibrium of the phase model."""

    STABLE = "stable"
    UNSTABLE = "unstable"
    SADDLE = "saddle"
    CENTER_DEGENERATE = "center-degenerate"


@dataclass(frozen=True)
class Equilibrium:
    """An equilibrium of the phase model with its linearization data."""

    x: float
    theta: float
    k: int
    stability: Stability
    eigenvalues: tuple[complex, complex]


class NonEquilibriumError(ValueError):
    """The supplied point is not stationary to the required tolerance."""


def classify_stability(
    point: tuple[float, float], p: PllParams, residual_tol: float = 1e-8
) -> tuple[Stability, tuple[complex, complex]]:
    """Classify an equilibrium point via the eigenvalues of the Jacobian.

    Parameters
    ----------
    point : (x, theta)
        Must satisfy ``equilibrium_residual(x, theta, p) < residual_tol``.

    Returns
    -------
    (stability, eigenvalues)

    Raises
    ------
    NonEquilibriumError
        If the point is not an equilibrium to within ``residual_tol``.
    """
    x, theta = point
    res = equilibrium_residual(x, theta, p)
    if not res < residual_tol:
        raise NonEquilibriumError(
            f"point ({x}, {theta}) has scaled residual {res:.3e} "
            f">= {residual_tol:.1e}; not an equilibrium"
        )
    jac = phase_jacobian(x, theta, p)
    eigs = np.linalg.eigvals(jac)
    lam1, lam2 = complex(eigs[0]), complex(eigs[1])
    # Degeneracy threshold relative to the eigenvalue scale.
    eps = 1e-12 * max(1.0, abs(lam1), abs(lam2))
    real_pair = abs(lam1.imag) <= eps and abs(lam2.imag) <= eps
    if real_pair and lam1.real * lam2.real < 0.0:
        kind = Stability.SADDLE
    elif max(lam1.real, lam2.real) < -eps:
        kind = Stability.STABLE
    elif min(lam1.real, lam2.real) > eps:
        kind = Stability.UNSTABLE
    else:
        kind = Stability.CENTER_DEGENERATE
    return kind, (lam1, lam2)


def _newton_refine(x: float, theta: float, p: PllParams) -> tuple[float, float]:
    # One Newton step on the phase-model RHS; the closed form is already
    # machine-accurate, this just polishes the last few ulps.
    dx, dtheta = phase_rhs(PhaseState(x=x, theta_delta=theta), p)
    jac = phase_jacobian(x, theta, p)
    try:
        delta = np.linalg.solve(jac, -np.array([dx, dtheta]))
    except np.linalg.LinAlgError:
        return x, theta
    return x + float(delta[0]), theta + float(delta[1])


def equilibria(p: PllParams, k_range=range(0, 2)) -> list[Equilibrium]:
    """Equilibria of the phase model for each branch index k.

    Stationary points satisfy ``sin(theta_eq) = 2*omega_delta/L`` and
    ``x_eq = -(b/a) * (1/2) * sin(theta_eq)`` (for the lead-lag realization
    ``-b/a`` equals ``tau1``, so this is the familiar
    ``x_eq = (tau1/2)*sin(theta_eq)``).  For each ``k`` in ``k_range`` the
    angle branch is ``theta_eq = (-1)**k * asin(2*omega_delta/L) + pi*k``.

    Returns an empty list when ``|2*omega_delta/L| > 1`` (pull-out: the
    detuning exceeds what the detector can cancel, no stationary state).
    Each returned point is polished by one Newton step and classified.
    """
    ratio = 2.0 * p.omega_delta / p.vco_gain
    if abs(ratio) > 1.0:
        return []
    base = math.asin(ratio)
    f = p.filter
    out = []
    for k in k_range:
        theta = (-1.0) ** k * base + math.pi * k
        x = -(f.b / f.a) * 0.5 * math.sin(theta)
        x, theta = _newton_refine(x, theta, p)
        kind, eigs = classify_stability((x, theta), p)
        out.append(Equilibrium(x=x, theta=theta, k=int(k), stability=kind, eigenvalues=eigs))
    return out
