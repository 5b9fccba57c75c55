"""Radial shooting in the ``s = w(0)`` parametrization.

    w'' + (1/r + tau r / 2) w' + exp(w) exp(-r**2 / 4) = 0,  w'(0) = 0, w(0) = s

integrated together with the running mass
``M'(r) = 2 pi exp(w) exp(-r**2/4) r``. Then ``sigma = exp(w(inf))``,
``v(r) = w(r) - w(inf)`` and the two parametrizations are linked by
``2 a = exp(s)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np

from . import backend
from .cumulated import SEED_WARN, CumulatedParams, SeedResolutionWarning, derive, solve
from .integrator import IntegrationConfig, quadrature

__all__ = [
    "WParams",
    "WProfile",
    "WDerived",
    "seed_w",
    "solve_w",
    "derive_w",
    "crosscheck",
    "auto_r_max",
]

TAIL_EXPONENT = 30.0
CROSSCHECK_TOL = 1e-4


def auto_r_max(tau: float) -> float:
    """Truncation radius, not below 10, where ``exp(-min(1, tau) r**2 / 4)``
    has dropped to ``exp(-30)``."""
    return max(10.0, math.sqrt(4.0 * TAIL_EXPONENT / min(1.0, tau)))


@dataclass(frozen=True)
class WParams:
    s: float
    tau: float
    eps: float = 1e-8
    r_max: Optional[float] = None
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)

    def __post_init__(self):
        if not math.isfinite(self.s):
            raise ValueError("s must be finite")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be positive and finite, got {self.tau}")
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if self.r_max is not None and not self.r_max > 1:
            raise ValueError(f"r_max must exceed 1, got {self.r_max}")

    @property
    def resolved_r_max(self) -> float:
        return auto_r_max(self.tau) if self.r_max is None else float(self.r_max)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["r_max"] = self.resolved_r_max
        return d


@dataclass(frozen=True)
class WProfile:
    grid: np.ndarray
    w: np.ndarray
    dw: np.ndarray
    mass_running: np.ndarray
    params: WParams

    def __post_init__(self):
        for name in ("grid", "w", "dw", "mass_running"):
            getattr(self, name).setflags(write=False)

    def to_csv_rows(self):
        return zip(self.grid, self.w, self.dw, self.mass_running)


@dataclass(frozen=True)
class WDerived:
    s: float
    tau: float
    w_inf: float
    sigma: float
    mass: float
    v0: float
    # analytic mass beyond r_max (added) and a bound on w(inf) - w(r_max) (neglected)
    mass_tail: float = 0.0
    w_tail_bound: float = 0.0

    @property
    def mass_over_2pi(self) -> float:
        return self.mass / (2.0 * math.pi)


def seed_w(params: WParams):
    """Taylor seed ``(eps, (w, w', M))`` using ``w''(0) = -exp(s) / 2``."""
    eps, es = params.eps, math.exp(params.s)
    # same expansion parameter as the cumulated seed, with y = r**2 and 2a = exp(s)
    size = 0.25 * (1.0 + es) * eps * eps
    if size > SEED_WARN:
        warnings.warn(
            f"seed correction (1+exp(s))eps^2/4 = {size:.3g} at s={params.s:g}; reduce eps",
            SeedResolutionWarning,
            stacklevel=2,
        )
    return eps, (params.s - 0.25 * eps * eps * es, -0.5 * eps * es, math.pi * eps * eps * es)


def solve_w(params: WParams) -> WProfile:
    r0, state0 = seed_w(params)
    nodes, states = backend.run(
        backend.RADIAL, params.tau, r0, state0, params.resolved_r_max, params.integration
    )
    return WProfile(
        grid=nodes,
        w=states[:, 0].copy(),
        dw=states[:, 1].copy(),
        mass_running=states[:, 2].copy(),
        params=params,
    )


def derive_w(profile: WProfile) -> WDerived:
    prm = profile.params
    R = profile.grid[-1]
    w_inf = float(profile.w[-1])
    k = min(1.0, prm.tau)
    # v(r) <= C exp(-k r^2/4) with C = sigma exp(v(0)) / k = exp(s) / k
    w_tail_bound = math.exp(prm.s - 0.25 * k * R * R) / k
    mass_tail = 4.0 * math.pi * math.exp(w_inf - 0.25 * R * R)
    return WDerived(
        s=prm.s,
        tau=prm.tau,
        w_inf=w_inf,
        sigma=math.exp(w_inf),
        mass=float(profile.mass_running[-1] + mass_tail),
        v0=prm.s - w_inf,
        mass_tail=mass_tail,
        w_tail_bound=w_tail_bound,
    )


def density_mass(profile: WProfile, derived: WDerived) -> float:
    """``2 pi int u r dr`` with ``u = sigma exp(v) exp(-r**2/4)`` rebuilt from w."""
    r = profile.grid
    v = profile.w - derived.w_inf
    u = derived.sigma * np.exp(v - 0.25 * r * r)
    f = 2.0 * math.pi * u * r
    rate = profile.dw - 0.5 * r + 1.0 / r
    ddw = -(1.0 / r + 0.5 * profile.params.tau * r) * profile.dw - np.exp(profile.w - 0.25 * r * r)
    df = f * rate
    ddf = df * rate + f * (ddw - 0.5 - 1.0 / (r * r))
    head = math.pi * r[0] ** 2 * math.exp(profile.params.s)
    return quadrature(r, f, df, ddf) + head + derived.mass_tail


def crosscheck(a: float, tau: float, cumulated_params: Optional[CumulatedParams] = None,
               w_params: Optional[WParams] = None) -> dict:
    """Solve both formulations at ``s = log(2a)`` and compare M, sigma, v(0)."""
    if not (a > 0 and tau > 0):
        raise ValueError("a and tau must be positive")
    cp = cumulated_params or CumulatedParams(a=a, tau=tau)
    wp = w_params or WParams(s=math.log(2.0 * a), tau=tau)
    dc = derive(solve(cp))
    dw = derive_w(solve_w(wp))

    def rel(x, y):
        return abs(x - y) / abs(y)

    report = {
        "a": a,
        "tau": tau,
        "s": wp.s,
        "cumulated": {"mass": dc.mass, "sigma": dc.sigma, "v0": dc.v0},
        "w": {"mass": dw.mass, "sigma": dw.sigma, "v0": dw.v0},
        "rel_mass": rel(dc.mass, dw.mass),
        "rel_sigma": rel(dc.sigma, dw.sigma),
        "rel_v0": rel(dc.v0, dw.v0),
        "tolerance": CROSSCHECK_TOL,
    }
    report["passed"] = all(report[k] < CROSSCHECK_TOL for k in ("rel_mass", "rel_sigma", "rel_v0"))
    return report
