"""Explicit ODE integrators with event detection.

Three methods behind one entry point, :func:`integrate`:

* ``EULER`` and ``RK4``: fixed-step, every step exactly ``fixed_step``
  long except the last, which is clamped to land on ``t_end``;
* ``RK45``: the Dormand-Prince embedded 5(4) pair with elementary
  error-per-step control ``err <= abs_tol + rel_tol*|y|``.

Why hand-rolled rather than wrapping a library solver: the whole point
of this package is to *study* how solver configuration changes the
qualitative answer, so the stepping rules themselves are the object
under test and every knob must be explicit and deterministic.  Identical
inputs produce bit-identical trajectories; there is no randomness and no
wall-clock anywhere in the stepping.

Event crossings are located by bisection on linearly interpolated states
between accepted steps (a documented accuracy limit of the dense output)
to a time tolerance of ``1e-12 * t_end``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field
from typing import Callable, Iterable, Sequence

import numpy as np

__all__ = [
    "Method",
    "SolverConfig",
    "SolverStats",
    "Trajectory",
    "EventDirection",
    "EventSpec",
    "EventCrossing",
    "IntegrationError",
    "StepUnderflowError",
    "NonFiniteStateError",
    "integrate",
    "convergence_order",
    "oracle_config",
    "coarse_config",
    "write_csv",
    "read_csv",
]


class Method(enum.Enum):
    EULER = "euler"
    RK4 = "rk4"
    RK45 = "rk45"


class IntegrationError(RuntimeError):
    pass


class StepUnderflowError(IntegrationError):
    """The adaptive controller asked for a step below ``min_step``."""


class NonFiniteStateError(IntegrationError):
    """A state component became NaN or infinite during integration."""


@dataclass(frozen=True)
class SolverConfig:
    """Integrator selection plus step/tolerance controls.

    ``fixed_step`` applies to EULER/RK4; ``rel_tol``/``abs_tol``/
    ``min_step``/``max_step`` apply to RK45.  ``t_end`` is the horizon for
    every method.
    """

    method: Method
    t_end: float
    fixed_step: float | None = None
    rel_tol: float = 1e-6
    abs_tol: float = 1e-9
    max_step: float = math.inf
    min_step: float = 1e-14

    def validate(self) -> None:
        if not (self.t_end > 0.0 and math.isfinite(self.t_end)):
            raise ValueError(f"t_end must be finite and > 0, got {self.t_end}")
        if self.method in (Method.EULER, Method.RK4):
            if self.fixed_step is None or not (0.0 < self.fixed_step):
                raise ValueError(
                    f"{self.method.value} needs fixed_step > 0, got {self.fixed_step}"
                )
        else:
            if not (self.rel_tol > 0.0 and self.abs_tol > 0.0):
                raise ValueError("rel_tol and abs_tol must be > 0")
            if not (0.0 < self.min_step <= self.max_step):
                raise ValueError("need 0 < min_step <= max_step")


def oracle_config(t_end: float = 5.0) -> SolverConfig:
    """The over-resolved configuration used as ground truth everywhere."""
    return SolverConfig(method=Method.RK45, t_end=t_end, rel_tol=1e-9, abs_tol=1e-12)


def coarse_config(t_end: float = 5.0) -> SolverConfig:
    """The canonical coarse configuration (RK4, 1 ms steps)."""
    return SolverConfig(method=Method.RK4, t_end=t_end, fixed_step=1e-3)


@dataclass
class SolverStats:
    steps_accepted: int = 0
    steps_rejected: int = 0
    rhs_evals: int = 0


@dataclass
class Trajectory:
    """Accepted samples of one integration run.

    ``t`` is strictly increasing with ``t[0] = 0``; the last sample sits at
    ``t_end`` unless a terminal event stopped the run early.  ``g`` holds
    the optional scalar output recorded alongside each sample.
    """

    t: np.ndarray
    y: np.ndarray
    g: np.ndarray | None
    stats: SolverStats = field(default_factory=SolverStats)

    def __len__(self) -> int:
        return len(self.t)


class EventDirection(enum.Enum):
    RISING = "rising"
    FALLING = "falling"
    BOTH = "both"


@dataclass(frozen=True)
class EventSpec:
    """Scalar event function whose sign changes are located and reported.

    ``function(t, y)`` must be continuous along a step.  ``terminal``
    events stop the integration at the crossing.
    """

    function: Callable[[float, np.ndarray], float]
    direction: EventDirection = EventDirection.BOTH
    terminal: bool = False


@dataclass(frozen=True)
class EventCrossing:
    event_index: int
    t: float
    y: np.ndarray


def _direction_ok(spec: EventSpec, g0: float, g1: float) -> bool:
    if spec.direction is EventDirection.RISING:
        return g0 < 0.0 <= g1
    if spec.direction is EventDirection.FALLING:
        return g0 > 0.0 >= g1
    return (g0 < 0.0 <= g1) or (g0 > 0.0 >= g1)


def _bisect_crossing(
    spec: EventSpec,
    t0: float,
    y0: np.ndarray,
    t1: float,
    y1: np.ndarray,
    g0: float,
    time_tol: float,
) -> tuple[float, np.ndarray]:
    # Bisection on the event function along the chord between the two
    # accepted samples.  For an event linear in t this is exact up to the
    # time tolerance.
    lo, hi = t0, t1
    span = t1 - t0
    while hi - lo > time_tol:
        mid = 0.5 * (lo + hi)
        w = (mid - t0) / span
        gm = spec.function(mid, y0 + w * (y1 - y0))
        if gm == 0.0:
            lo = hi = mid
            break
        if (g0 < 0.0) == (gm < 0.0):
            lo = mid
        else:
            hi = mid
    t_star = 0.5 * (lo + hi)
    w = (t_star - t0) / span
    return t_star, y0 + w * (y1 - y0)


_SQRT_TINY = math.sqrt(np.finfo(float).tiny)

# Dormand-Prince 5(4) tableau.  The fifth-order solution is propagated;
# the last row of A doubles as its weights (FSAL: the seventh stage of an
# accepted step is the first stage of the next one).
_DP_C = np.array([0.0, 1 / 5, 3 / 10, 4 / 5, 8 / 9, 1.0, 1.0])
_DP_A = [
    np.array([], dtype=float),
    np.array([1 / 5]),
    np.array([3 / 40, 9 / 40]),
    np.array([44 / 45, -56 / 15, 32 / 9]),
    np.array([19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729]),
    np.array([9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656]),
    np.array([35 / 384, 0.0, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84]),
]
_DP_ERR = np.array(
    [
        35 / 384 - 5179 / 57600,
        0.0,
        500 / 1113 - 7571 / 16695,
        125 / 192 - 393 / 640,
        -2187 / 6784 + 92097 / 339200,
        11 / 84 - 187 / 2100,
        -1 / 40,
    ]
)


def _check_finite(y: np.ndarray, t: float) -> None:
    if not np.all(np.isfinite(y)):
        raise NonFiniteStateError(f"non-finite state at t={t!r}: {y!r}")


def integrate(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    init: Sequence[float] | np.ndarray,
    cfg: SolverConfig,
    events: Iterable[EventSpec] = (),
    output: Callable[[float, np.ndarray], float] | None = None,
) -> tuple[Trajectory, list[EventCrossing]]:
    """Integrate ``dy/dt = rhs(t, y)`` from t=0 to ``cfg.t_end``.

    Parameters
    ----------
    rhs : callable ``(t, y) -> dy/dt`` as a 1-D array.
    init : initial state, finite.
    cfg : solver configuration (validated here).
    events : event specifications; crossings are located by bisection to a
        time tolerance of ``1e-12 * t_end`` and returned in time order.  A
        terminal event truncates the trajectory at the crossing.
    output : optional scalar ``(t, y) -> g`` recorded at every accepted
        sample (and at a terminal-event endpoint).

    Returns
    -------
    (Trajectory, list[EventCrossing])

    Raises
    ------
    StepUnderflowError
        If the adaptive controller needs a step smaller than ``min_step``.
    NonFiniteStateError
        If any state component becomes NaN or infinite.
    """
    cfg.validate()
    y = np.asarray(init, dtype=float).copy()
    if y.ndim != 1:
        raise ValueError("init must be one-dimensional")
    _check_finite(y, 0.0)
    events = list(events)

    stats = SolverStats()
    ts: list[float] = [0.0]
    ys: list[np.ndarray] = [y.copy()]
    gs: list[float] | None = None
    if output is not None:
        gs = [float(output(0.0, y))]
    crossings: list[EventCrossing] = []
    ev_vals = [ev.function(0.0, y) for ev in events]
    time_tol = 1e-12 * cfg.t_end

    def handle_events(t0, y0, t1, y1) -> tuple[float, np.ndarray] | None:
        # Returns a truncation point when a terminal event fires.
        nonlocal ev_vals
        new_vals = [ev.function(t1, y1) for ev in events]
        step_hits: list[tuple[float, np.ndarray, int]] = []
        for i, ev in enumerate(events):
            g0, g1 = ev_vals[i], new_vals[i]
            if g0 * g1 < 0.0 or (g1 == 0.0 and g0 != 0.0):
                if _direction_ok(ev, g0, g1):
                    tc, yc = _bisect_crossing(ev, t0, y0, t1, y1, g0, time_tol)
                    step_hits.append((tc, yc, i))
        step_hits.sort(key=lambda hit: hit[0])
        for tc, yc, i in step_hits:
            crossings.append(EventCrossing(event_index=i, t=tc, y=yc))
            if events[i].terminal:
                return tc, yc
        ev_vals = new_vals
        return None

    def record(t, ynew) -> None:
        ts.append(t)
        ys.append(ynew.copy())
        if gs is not None:
            gs.append(float(output(t, ynew)))

    if cfg.method in (Method.EULER, Method.RK4):
        h = cfg.fixed_step
        t = 0.0
        while t < cfg.t_end - time_tol:
            step = min(h, cfg.t_end - t)
            if cfg.method is Method.EULER:
                ynew = y + step * rhs(t, y)
                stats.rhs_evals += 1
            else:
                k1 = rhs(t, y)
                k2 = rhs(t + step / 2.0, y + (step / 2.0) * k1)
                k3 = rhs(t + step / 2.0, y + (step / 2.0) * k2)
                k4 = rhs(t + step, y + step * k3)
                ynew = y + (step / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
                stats.rhs_evals += 4
            tnew = t + step
            _check_finite(ynew, tnew)
            stats.steps_accepted += 1
            stop = handle_events(t, y, tnew, ynew) if events else None
            if stop is not None:
                record(stop[0], stop[1])
                break
            record(tnew, ynew)
            t, y = tnew, ynew
    else:
        t = 0.0
        h = min(cfg.max_step, 1e-2 * cfg.t_end)
        k = np.empty((7, y.size))
        k[0] = rhs(t, y)
        stats.rhs_evals += 1
        while t < cfg.t_end - time_tol:
            h = min(h, cfg.max_step)
            if h < cfg.min_step:
                raise StepUnderflowError(
                    f"step {h!r} below min_step {cfg.min_step!r} at t={t!r}"
                )
            h = min(h, cfg.t_end - t)  # the t_end clamp is exempt from min_step
            for i in range(1, 7):
                yi = y + h * (_DP_A[i] @ k[:i])
                k[i] = rhs(t + _DP_C[i] * h, yi)
            stats.rhs_evals += 6
            ynew = yi  # seventh stage is evaluated at the fifth-order solution
            tnew = t + h
            err_vec = h * (_DP_ERR @ k)
            scale = cfg.abs_tol + cfg.rel_tol * np.maximum(np.abs(y), np.abs(ynew))
            with np.errstate(invalid="ignore"):
                err = math.sqrt(float(np.mean((err_vec / scale) ** 2)))
            if math.isnan(err):
                err = math.inf
            if err <= 1.0:
                _check_finite(ynew, tnew)
                stats.steps_accepted += 1
                stop = handle_events(t, y, tnew, ynew) if events else None
                if stop is not None:
                    record(stop[0], stop[1])
                    break
                record(tnew, ynew)
                t, y = tnew, ynew
                k[0] = k[6]
                factor = 5.0 if err == 0.0 else min(5.0, 0.9 * err ** -0.2)
            else:
                stats.steps_rejected += 1
                factor = max(0.2, 0.9 * err ** -0.2)
            h *= factor
            if h <= _SQRT_TINY:
                raise StepUnderflowError(f"step collapsed to {h!r} at t={t!r}")

    traj = Trajectory(
        t=np.array(ts),
        y=np.vstack(ys),
        g=np.array(gs) if gs is not None else None,
        stats=stats,
    )
    return traj, crossings


def convergence_order(
    rhs: Callable[[float, np.ndarray], np.ndarray],
    init: Sequence[float],
    method: Method,
    steps: Sequence[float],
    t_end: float,
    reference: np.ndarray | None = None,
) -> float:
    """Measured order of a fixed-step method by self-convergence.

    Integrates to ``t_end`` with each step size in ``steps``, measures the
    final-state error against ``reference`` (computed with RK4 at
    ``min(steps)/20`` when not supplied) and returns the least-squares
    slope of log(error) vs log(h).
    """
    if method not in (Method.EULER, Method.RK4):
        raise ValueError("convergence_order applies to fixed-step methods")
    if reference is None:
        ref_cfg = SolverConfig(
            method=Method.RK4, t_end=t_end, fixed_step=min(steps) / 20.0
        )
        reference = integrate(rhs, init, ref_cfg)[0].y[-1]
    errs = []
    for h in steps:
        cfg = SolverConfig(method=method, t_end=t_end, fixed_step=float(h))
        yf = integrate(rhs, init, cfg)[0].y[-1]
        errs.append(float(np.linalg.norm(yf - reference)))
    log_h = np.log(np.asarray(steps, dtype=float))
    log_e = np.log(np.asarray(errs))
    slope = np.polyfit(log_h, log_e, 1)[0]
    return float(slope)


def write_csv(traj: Trajectory, path, theta_label: str = "theta") -> None:
    """Write a trajectory as CSV: ``t,x,<theta_label>,g``, one row per
    accepted step, shortest round-trip decimal formatting."""

    def fmt(v: float) -> str:
        return repr(float(v))

    with open(path, "w", encoding="ascii", newline="\n") as fh:
        fh.write(f"t,x,{theta_label},g\n")
        g = traj.g if traj.g is not None else np.full(len(traj), math.nan)
        for ti, yi, gi in zip(traj.t, traj.y, g):
            fh.write(f"{fmt(ti)},{fmt(yi[0])},{fmt(yi[1])},{fmt(gi)}\n")


def read_csv(path) -> tuple[Trajectory, str]:
    """Read a trajectory CSV written by :func:`write_csv`.

    Returns the trajectory and the phase column label (``theta`` for the
    phase model, ``theta2`` for the circuit model).
    """
    with open(path, "r", encoding="ascii") as fh:
        header = fh.readline().strip().split(",")
        if len(header) != 4 or header[0] != "t" or header[1] != "x" or header[3] != "g":
            raise ValueError(f"unrecognized trajectory header: {header!r}")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if not rows:
        raise ValueError("trajectory file has no samples")
    data = np.array([[float(v) for v in row] for row in rows])
    traj = Trajectory(t=data[:, 0], y=data[:, 1:3], g=data[:, 3])
    return traj, header[2]
