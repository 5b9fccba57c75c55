"""Cumulated-density shooting problem.

Unknowns are the cumulated cell density ``phi(y)`` with ``y = r**2`` and
``S(y) = -sqrt(y) v'(sqrt(y))``:

    phi'' = -phi' / 4 - phi' S / (2 y)
    S'    =  phi' - tau S / 4

with ``phi(0) = 0``, ``phi'(0) = a``, ``S(0) = 0``. The total mass is
``M = 2 pi phi(inf)``.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import asdict, dataclass, field
from typing import Optional

import numpy as np
from scipy.interpolate import CubicHermiteSpline
from scipy.special import exp1

from . import backend
from .integrator import IntegrationConfig, cumulative_quadrature, quadrature

__all__ = [
    "CumulatedParams",
    "CumulatedProfile",
    "DerivedQuantities",
    "InvalidSeedError",
    "SeedResolutionWarning",
    "seed",
    "solve",
    "derive",
    "reconstruct",
    "auto_y_max",
    "identity_integrand",
]

# Truncation is placed where the slowest decaying mode has dropped by e**-30.
TAIL_EXPONENT = 30.0
# Above this relative seed correction (1 + 2a) eps / 4 the expansion is unreliable.
SEED_WARN = 1e-2


class SeedResolutionWarning(UserWarning):
    pass


class InvalidSeedError(ValueError):
    pass


def auto_y_max(tau: float) -> float:
    """Smallest truncation point, not below 30, beyond which every profile
    component has decayed by at least ``exp(-30)``."""
    return max(30.0, 4.0 * TAIL_EXPONENT / min(1.0, tau))


@dataclass(frozen=True)
class CumulatedParams:
    a: float
    tau: float
    eps: float = 1e-6
    y_max: Optional[float] = None
    seed_order: int = 2
    integration: IntegrationConfig = field(default_factory=IntegrationConfig)

    def __post_init__(self):
        if not (self.a > 0 and math.isfinite(self.a)):
            raise ValueError(f"a must be positive and finite, got {self.a}")
        if not (self.tau > 0 and math.isfinite(self.tau)):
            raise ValueError(f"tau must be positive and finite, got {self.tau}")
        if not 0 < self.eps < 1:
            raise ValueError(f"eps must lie in (0, 1), got {self.eps}")
        if self.y_max is not None and not self.y_max > 1:
            raise ValueError(f"y_max must exceed 1, got {self.y_max}")
        if self.seed_order not in (1, 2):
            raise ValueError("seed_order must be 1 or 2")

    @property
    def resolved_y_max(self) -> float:
        return auto_y_max(self.tau) if self.y_max is None else float(self.y_max)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["y_max"] = self.resolved_y_max
        return d


@dataclass(frozen=True)
class CumulatedProfile:
    grid: np.ndarray
    phi: np.ndarray
    dphi: np.ndarray
    S: np.ndarray
    params: CumulatedParams
    # exp(y/4) phi', and the node derivatives of phi' and S from the ODE
    q: np.ndarray = field(repr=False, default=None)
    ddphi: np.ndarray = field(repr=False, default=None)
    dS: np.ndarray = field(repr=False, default=None)

    def __post_init__(self):
        if self.q is None:
            object.__setattr__(self, "q", np.exp(0.25 * self.grid) * self.dphi)
        if self.ddphi is None or self.dS is None:
            dd, ds = _derivatives(self.grid, self.dphi, self.S, self.params.tau)
            object.__setattr__(self, "ddphi", dd)
            object.__setattr__(self, "dS", ds)
        for name in ("grid", "phi", "dphi", "S", "q", "ddphi", "dS"):
            getattr(self, name).setflags(write=False)

    def to_csv_rows(self):
        return zip(self.grid, self.phi, self.dphi, self.S)


@dataclass(frozen=True)
class DerivedQuantities:
    mass_over_2pi: float
    sigma: float
    l: float
    v0: float
    mass_from_S: float
    # size of the analytic tail corrections beyond y_max
    mass_tail: float = 0.0
    v0_tail: float = 0.0

    @property
    def mass(self) -> float:
        return 2.0 * math.pi * self.mass_over_2pi

    @property
    def consistency(self) -> float:
        """Relative gap between the two mass evaluations."""
        return abs(self.mass_over_2pi - self.mass_from_S) / self.mass_over_2pi


def _derivatives(y, dphi, S, tau):
    ddphi = -dphi * (0.25 + S / (2.0 * y))
    dS = dphi - 0.25 * tau * S
    return ddphi, dS


def seed(params: CumulatedParams, order: Optional[int] = None):
    """Initial point ``(eps, (phi, phi', S))`` replacing the singular origin.

    ``order=1`` is the classical first-order expansion
    ``phi'(eps) = a - a (1 + 2a) eps / 4``, ``phi(eps) = a eps - a (1 + 2a) eps**2 / 8``,
    ``S(eps) = a eps``. ``order=2`` adds the next Taylor coefficient of each
    component, which removes the ``O(a**2 eps**2)`` offset in ``S``.
    """
    order = params.seed_order if order is None else order
    a, tau, eps = params.a, params.tau, params.eps
    p1 = -0.25 * a * (1.0 + 2.0 * a)
    if order == 1:
        dphi = a + p1 * eps
        phi = a * eps + 0.5 * p1 * eps * eps
        S = a * eps
    else:
        s2 = -0.125 * a * (1.0 + 2.0 * a + tau)
        p2 = a * ((1.0 + 2.0 * a) ** 2 + a * (1.0 + 2.0 * a + tau)) / 32.0
        s3 = (p2 - 0.25 * tau * s2) / 3.0
        dphi = a + eps * (p1 + eps * p2)
        phi = eps * (a + eps * (0.5 * p1 + eps * p2 / 3.0))
        S = eps * (a + eps * (s2 + eps * s3))
    if not dphi > 0:
        raise InvalidSeedError(
            f"eps={eps:g} too large for a={a:g}: seeded phi'(eps)={dphi:g} is not positive"
        )
    if (1.0 + 2.0 * a) * eps / 4.0 > SEED_WARN:
        warnings.warn(
            f"seed correction (1+2a)eps/4 = {(1 + 2 * a) * eps / 4:.3g} at a={a:g}; reduce eps",
            SeedResolutionWarning,
            stacklevel=2,
        )
    return eps, (phi, dphi, S)


def solve(params: CumulatedParams) -> CumulatedProfile:
    y0, state0 = seed(params)
    y_max = params.resolved_y_max
    if not y_max > y0:
        raise ValueError("y_max must exceed eps")
    phi0, dphi0, S0 = state0
    # Integrated in log(exp(y/4) phi'), which decreases from log a to log l;
    # phi' itself drops below the absolute tolerance long before y_max and
    # q = exp(y/4) phi' would carry only absolute accuracy when l is small.
    nodes, states = backend.run(
        backend.CUMULATED,
        params.tau,
        y0,
        (phi0, 0.25 * y0 + math.log(dphi0), S0),
        y_max,
        params.integration,
    )
    q = np.exp(states[:, 1])
    return CumulatedProfile(
        grid=nodes,
        phi=states[:, 0].copy(),
        dphi=q * np.exp(-0.25 * nodes),
        S=states[:, 2].copy(),
        params=params,
        q=q,
    )


def _tail_rates(profile: CumulatedProfile):
    """Local exponential decay rates of phi' and S at the truncation point."""
    k_s = -profile.dS[-1] / profile.S[-1]
    if not k_s > 0:
        k_s = 0.25 * min(1.0, profile.params.tau)
    return k_s


def _second_derivatives(profile):
    """Third derivative of phi and second of S, from the ODE differentiated once."""
    y, p, S = profile.grid, profile.dphi, profile.S
    dp, dS = profile.ddphi, profile.dS
    dddphi = -dp * (0.25 + S / (2.0 * y)) - p * (dS / (2.0 * y) - S / (2.0 * y * y))
    ddS = dp - 0.25 * profile.params.tau * dS
    return dddphi, ddS


def _s_over_y(profile):
    """``S / y`` with its first two derivatives."""
    y, S, dS = profile.grid, profile.S, profile.dS
    _, ddS = _second_derivatives(profile)
    f = S / y
    df = dS / y - S / (y * y)
    ddf = ddS / y - 2.0 * dS / (y * y) + 2.0 * S / (y * y * y)
    return f, df, ddf


def identity_integrand(profile: CumulatedProfile):
    """``phi' (2 phi - 2 S - y)`` with its first two derivatives."""
    phi, p, S = profile.phi, profile.dphi, profile.S
    tau = profile.params.tau
    dddphi, _ = _second_derivatives(profile)
    g = 2.0 * phi - 2.0 * S - profile.grid
    dg = 0.5 * tau * S - 1.0
    ddg = 0.5 * tau * profile.dS
    f = p * g
    df = profile.ddphi * g + p * dg
    ddf = dddphi * g + 2.0 * profile.ddphi * dg + p * ddg
    return f, df, ddf


def derive(profile: CumulatedProfile) -> DerivedQuantities:
    """Mass, sigma, the limit ``l`` and ``v(0)``, with analytic tails past y_max."""
    prm = profile.params
    a, tau, eps = prm.a, prm.tau, prm.eps
    y = profile.grid
    Y = y[-1]
    pY, SY = profile.dphi[-1], profile.S[-1]
    k_s = _tail_rates(profile)

    mass_tail = 4.0 * pY
    mass = profile.phi[-1] + mass_tail

    # int_Y^inf S(z)/z dz for S(z) = S(Y) exp(-k (z - Y))
    kY = k_s * Y
    v_tail = SY * math.exp(kY) * exp1(kY) if kY < 700 else SY / kY
    v_int = quadrature(y, *_s_over_y(profile))
    v0 = 0.5 * (a * eps + v_int + v_tail)

    l = profile.q[-1] * math.exp(-0.5 * v_tail)

    _, ddS = _second_derivatives(profile)
    s_int = quadrature(y, profile.S, profile.dS, ddS)
    mass_from_S = 0.25 * tau * (0.5 * a * eps * eps + s_int + SY / k_s)

    return DerivedQuantities(
        mass_over_2pi=float(mass),
        sigma=float(2.0 * l),
        l=float(l),
        v0=float(v0),
        mass_from_S=float(mass_from_S),
        mass_tail=float(mass_tail),
        v0_tail=float(0.5 * v_tail),
    )


def mass_identity_residual(profile: CumulatedProfile, derived: DerivedQuantities) -> float:
    """``m**2 - 4 m - int phi'(2 phi - 2 S - y) dy`` with ``m = M / 2 pi``."""
    m = derived.mass_over_2pi
    a, eps = profile.params.a, profile.params.eps
    Y = profile.grid[-1]
    pY = profile.dphi[-1]
    # [0, eps]: phi ~ S ~ a y, phi' ~ a
    head = -0.5 * a * eps * eps
    # past Y: phi' ~ pY exp(-(z - Y)/4), phi -> m, S -> 0
    tail = 4.0 * pY * (2.0 * m - Y - 4.0)
    integral = head + quadrature(profile.grid, *identity_integrand(profile)) + tail
    return m * m - 4.0 * m - integral


def v_profile(profile: CumulatedProfile, derived: Optional[DerivedQuantities] = None) -> np.ndarray:
    """``v(sqrt(y)) = 1/2 int_y^inf S(z)/z dz`` at every node."""
    derived = derived or derive(profile)
    running = cumulative_quadrature(profile.grid, *_s_over_y(profile))
    return derived.v0 - 0.5 * profile.params.a * profile.params.eps - 0.5 * running


def reconstruct(profile: CumulatedProfile, r_grid, derived: Optional[DerivedQuantities] = None):
    """Radial profiles ``u(r) = 2 phi'(r**2)`` and ``v(r)`` on ``r_grid``."""
    r = np.asarray(r_grid, dtype=float)
    y = r * r
    lo, hi = profile.grid[0], profile.grid[-1]
    if np.any(y < lo * (1 - 1e-12)) or np.any(y > hi * (1 + 1e-12)):
        raise ValueError(
            f"r_grid must lie within [{math.sqrt(lo):.6g}, {math.sqrt(hi):.6g}]"
        )
    y = np.clip(y, lo, hi)
    derived = derived or derive(profile)
    # log(exp(y/4) phi') is nearly flat where phi' itself decays over one step
    f, _, _ = _s_over_y(profile)
    log_q = CubicHermiteSpline(profile.grid, np.log(profile.q), -0.5 * f)
    v_interp = CubicHermiteSpline(profile.grid, v_profile(profile, derived), -0.5 * f)
    return 2.0 * np.exp(log_q(y) - 0.25 * y), v_interp(y)


def mass_fraction(profile: CumulatedProfile, derived: DerivedQuantities, y: float) -> float:
    """Share of the total mass inside the disc of radius ``sqrt(y)``."""
    spline = CubicHermiteSpline(profile.grid, profile.phi, profile.dphi)
    return float(spline(min(max(y, profile.grid[0]), profile.grid[-1])) / derived.mass_over_2pi)
