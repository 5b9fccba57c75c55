"""Explicit adaptive Runge-Kutta integration and sampled-data quadrature.

The stepper is the Dormand-Prince 5(4) embedded pair with a PI step-size
controller. Steps are only ever reported at accepted nodes; there is no
dense interpolation between them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence

import numpy as np

__all__ = [
    "OdeSystem",
    "IntegrationConfig",
    "StopEvent",
    "Trajectory",
    "IntegrationError",
    "integrate",
    "quadrature",
    "cumulative_quadrature",
    "REACHED_END",
    "STEP_UNDERFLOW",
    "STEP_BUDGET_EXHAUSTED",
]

REACHED_END = "reached_end"
STEP_UNDERFLOW = "step_underflow"
STEP_BUDGET_EXHAUSTED = "step_budget_exhausted"

# Dormand-Prince 5(4) tableau.
C2, C3, C4, C5 = 1 / 5, 3 / 10, 4 / 5, 8 / 9
A21 = 1 / 5
A31, A32 = 3 / 40, 9 / 40
A41, A42, A43 = 44 / 45, -56 / 15, 32 / 9
A51, A52, A53, A54 = 19372 / 6561, -25360 / 2187, 64448 / 6561, -212 / 729
A61, A62, A63, A64, A65 = 9017 / 3168, -355 / 33, 46732 / 5247, 49 / 176, -5103 / 18656
A71, A73, A74, A75, A76 = 35 / 384, 500 / 1113, 125 / 192, -2187 / 6784, 11 / 84
E1, E3, E4, E5, E6, E7 = (
    71 / 57600,
    -71 / 16695,
    71 / 1920,
    -17253 / 339200,
    22 / 525,
    -1 / 40,
)

# PI controller constants (Hairer-Wanner DOPRI5 defaults).
SAFETY = 0.9
BETA = 0.04
ALPHA = 0.2 - 0.75 * BETA
FAC_MIN = 0.2
FAC_MAX = 10.0
ERR_FLOOR = 1e-4


class IntegrationError(RuntimeError):
    """Raised by callers that need a trajectory to reach its end point."""


@dataclass(frozen=True)
class OdeSystem:
    dimension: int
    rhs: Callable[[float, Sequence[float]], Sequence[float]]


@dataclass(frozen=True)
class IntegrationConfig:
    """Tolerances and step limits for :func:`integrate`.

    ``max_step`` and ``min_step`` default to the span of the integration
    interval and ``1e-14`` times that span respectively.
    """

    abs_tol: float = 1e-10
    rel_tol: float = 1e-10
    initial_step: float = 1e-6
    max_step: Optional[float] = None
    min_step: Optional[float] = None
    max_steps: int = 10_000_000

    def __post_init__(self):
        if not (self.abs_tol > 0 and self.rel_tol > 0):
            raise ValueError("tolerances must be positive")
        if not self.initial_step > 0:
            raise ValueError("initial_step must be positive")
        if self.max_steps < 1:
            raise ValueError("max_steps must be a positive integer")
        if self.max_step is not None and self.max_step < self.initial_step:
            raise ValueError("initial_step must not exceed max_step")
        if self.min_step is not None and self.min_step > self.initial_step:
            raise ValueError("min_step must not exceed initial_step")

    def resolved(self, span: float) -> tuple[float, float, float]:
        """Return ``(initial_step, max_step, min_step)`` for an interval length."""
        hmax = span if self.max_step is None else min(self.max_step, span)
        hmin = 1e-14 * span if self.min_step is None else self.min_step
        h0 = min(max(self.initial_step, hmin), hmax)
        return h0, hmax, hmin


@dataclass(frozen=True)
class StopEvent:
    predicate: Callable[[float, Sequence[float]], bool]
    label: str


@dataclass
class Trajectory:
    nodes: np.ndarray
    states: np.ndarray
    termination: str = REACHED_END
    rejected_steps: int = 0
    event_label: Optional[str] = field(default=None)

    @property
    def reached_end(self) -> bool:
        return self.termination == REACHED_END

    @property
    def final_state(self) -> np.ndarray:
        return self.states[-1]


def _error_norm(y, y_new, err, atol, rtol):
    worst = 0.0
    for yi, yn, ei in zip(y, y_new, err):
        scale = atol + rtol * max(abs(yi), abs(yn))
        r = abs(ei) / scale
        if r > worst or r != r:
            worst = r
    return worst


def integrate(
    system: OdeSystem,
    t0: float,
    state0: Sequence[float],
    t_end: float,
    config: Optional[IntegrationConfig] = None,
    events: Sequence[StopEvent] = (),
    output_grid: Optional[Sequence[float]] = None,
) -> Trajectory:
    """Integrate ``y' = rhs(t, y)`` from ``t0`` to ``t_end``.

    Event predicates are evaluated at every accepted node; the first one
    that fires ends the trajectory at that node.

    With ``output_grid`` the steps are shortened to land exactly on each
    requested point and only those points (plus ``t0``) are recorded.
    Nothing is interpolated.
    """
    if not t_end > t0:
        raise ValueError("t0 must be smaller than t_end")
    stops = [float(t_end)]
    if output_grid is not None:
        g = [float(v) for v in output_grid]
        if any(b <= a for a, b in zip(g[:-1], g[1:])):
            raise ValueError("output_grid must be strictly increasing")
        if g and not (t0 < g[0] and g[-1] <= t_end):
            raise ValueError("output_grid must lie in (t0, t_end]")
        stops = g if g and g[-1] == t_end else g + [float(t_end)]
    y = [float(v) for v in state0]
    n = len(y)
    if n != system.dimension:
        raise ValueError(f"state0 has length {n}, system dimension is {system.dimension}")
    config = config or IntegrationConfig()
    atol, rtol = config.abs_tol, config.rel_tol
    h, hmax, hmin = config.resolved(t_end - t0)
    f = system.rhs

    t = float(t0)
    nodes = [t]
    states = [list(y)]
    k1 = list(f(t, y))
    err_old = ERR_FLOOR
    last_rejected = False
    rejected = 0
    termination = REACHED_END
    label = None
    accepted = 0
    rng = range(n)
    k_stop = 0
    h_free = h

    while t < t_end:
        if accepted >= config.max_steps:
            termination = STEP_BUDGET_EXHAUSTED
            break
        target = stops[k_stop]
        remaining = target - t
        last = h >= remaining
        if last:
            h_free = h
            h = remaining
        elif h < hmin:
            termination = STEP_UNDERFLOW
            break

        ys = [y[i] + h * (A21 * k1[i]) for i in rng]
        k2 = f(t + C2 * h, ys)
        ys = [y[i] + h * (A31 * k1[i] + A32 * k2[i]) for i in rng]
        k3 = f(t + C3 * h, ys)
        ys = [y[i] + h * (A41 * k1[i] + A42 * k2[i] + A43 * k3[i]) for i in rng]
        k4 = f(t + C4 * h, ys)
        ys = [
            y[i] + h * (A51 * k1[i] + A52 * k2[i] + A53 * k3[i] + A54 * k4[i])
            for i in rng
        ]
        k5 = f(t + C5 * h, ys)
        ys = [
            y[i]
            + h * (A61 * k1[i] + A62 * k2[i] + A63 * k3[i] + A64 * k4[i] + A65 * k5[i])
            for i in rng
        ]
        t_new = t + h if not last else target
        k6 = f(t_new, ys)
        y_new = [
            y[i]
            + h * (A71 * k1[i] + A73 * k3[i] + A74 * k4[i] + A75 * k5[i] + A76 * k6[i])
            for i in rng
        ]
        k7 = f(t_new, y_new)
        err_vec = [
            h
            * (
                E1 * k1[i]
                + E3 * k3[i]
                + E4 * k4[i]
                + E5 * k5[i]
                + E6 * k6[i]
                + E7 * k7[i]
            )
            for i in rng
        ]
        err = _error_norm(y, y_new, err_vec, atol, rtol)

        if err <= 1.0:
            t = t_new
            y = y_new
            k1 = list(k7)
            accepted += 1
            if output_grid is None or last:
                nodes.append(t)
                states.append(list(y))
            if err == 0.0:
                fac = FAC_MAX
            else:
                fac = SAFETY * err ** (-ALPHA) * err_old**BETA
                fac = min(FAC_MAX, max(FAC_MIN, fac))
            if last_rejected:
                fac = min(fac, 1.0)
            err_old = max(err, ERR_FLOOR)
            last_rejected = False
            h = min(h * fac, hmax)
            if last:
                k_stop += 1
                if output_grid is not None:
                    # a step clipped to hit a grid point says nothing about the next one
                    h = min(max(h, h_free), hmax)
            fired = None
            for ev in events:
                if ev.predicate(t, y):
                    fired = ev.label
                    break
            if fired is not None:
                if output_grid is not None and not last:
                    nodes.append(t)
                    states.append(list(y))
                termination = f"event({fired})"
                label = fired
                break
        else:
            rejected += 1
            last_rejected = True
            if err != err:
                fac = FAC_MIN
            else:
                fac = max(FAC_MIN, SAFETY * err ** (-0.2))
            h = h * fac

    return Trajectory(
        nodes=np.asarray(nodes, dtype=float),
        states=np.asarray(states, dtype=float).reshape(len(nodes), n),
        termination=termination,
        rejected_steps=rejected,
        event_label=label,
    )


def _check_samples(nodes, values):
    x = np.asarray(nodes, dtype=float)
    f = np.asarray(values, dtype=float)
    if x.ndim != 1 or x.shape != f.shape:
        raise ValueError("nodes and values must be 1-d arrays of equal length")
    if x.size < 2:
        raise ValueError("quadrature needs at least two samples")
    if np.any(np.diff(x) <= 0):
        raise ValueError("nodes must be strictly increasing")
    return x, f


def _panel_integrals(x, f, df, ddf):
    h = np.diff(x)
    panels = 0.5 * h * (f[:-1] + f[1:])
    if df is None:
        return panels
    if ddf is None:
        # cubic Hermite: exact for cubics on every panel
        panels += h * h / 12.0 * (df[:-1] - df[1:])
    else:
        # quintic Hermite: exact for quintics on every panel
        panels += h * h / 10.0 * (df[:-1] - df[1:])
        panels += h**3 / 120.0 * (ddf[:-1] + ddf[1:])
    return panels


def _optional(arr, like):
    if arr is None:
        return None
    arr = np.asarray(arr, dtype=float)
    if arr.shape != like.shape:
        raise ValueError("derivative samples must match the values in shape")
    return arr


def quadrature(nodes, values, derivatives=None, second_derivatives=None) -> float:
    """Integrate sampled data over ``[nodes[0], nodes[-1]]``.

    Composite trapezoid rule by default. Known node derivatives switch to
    Hermite panels: first derivatives give a fourth-order rule, first and
    second derivatives a sixth-order one, on arbitrary grids.
    """
    x, f = _check_samples(nodes, values)
    df = _optional(derivatives, f)
    ddf = _optional(second_derivatives, f) if df is not None else None
    return float(math.fsum(_panel_integrals(x, f, df, ddf)))


def cumulative_quadrature(nodes, values, derivatives=None, second_derivatives=None) -> np.ndarray:
    """Running integral from ``nodes[0]``, same rule as :func:`quadrature`."""
    x, f = _check_samples(nodes, values)
    df = _optional(derivatives, f)
    ddf = _optional(second_derivatives, f) if df is not None else None
    out = np.empty_like(x)
    out[0] = 0.0
    np.cumsum(_panel_integrals(x, f, df, ddf), out=out[1:])
    return out
