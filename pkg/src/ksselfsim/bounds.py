"""Closed-form a-priori bounds and a checker that evaluates them on profiles.

All masses are in units of ``2 pi``: ``m = M / (2 pi) = phi(inf)``; the
critical mass ``8 pi`` is ``m = 4``.
"""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Optional, Union

import numpy as np
from scipy.optimize import brentq
from scipy.special import lambertw

from .cumulated import (
    CumulatedProfile,
    DerivedQuantities,
    _s_over_y,
    mass_identity_residual,
    v_profile,
)
from .integrator import cumulative_quadrature

__all__ = [
    "UNBOUNDED",
    "Unbounded",
    "I",
    "f_upper",
    "g_lower",
    "h",
    "g_point",
    "j",
    "a_star",
    "tau_bar",
    "mass_lower_envelope",
    "BoundEntry",
    "BoundsReport",
    "check_all",
]

SLACK = 1e-8
SERIES_BAND = 1e-4
CONSISTENCY_TOL = 1e-5
IDENTITY_TOL = 1e-4
REPRESENTATION_TOL = 1e-6


class Unbounded:
    """Marker for an infinite bound. Compares above every real number and
    refuses arithmetic."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "UNBOUNDED"

    def __str__(self):
        return "unbounded"

    def __gt__(self, other):
        return not isinstance(other, Unbounded)

    def __ge__(self, other):
        return True

    def __lt__(self, other):
        return False

    def __le__(self, other):
        return isinstance(other, Unbounded)


UNBOUNDED = Unbounded()


def _positive(name, x):
    if not x > 0:
        raise ValueError(f"{name} must be positive, got {x}")


def I(tau: float) -> float:
    """``log(tau) / (tau - 1)``, continuous through ``tau = 1`` where it is 1."""
    _positive("tau", tau)
    x = tau - 1.0
    if abs(x) < SERIES_BAND:
        return 1.0 - x / 2.0 + x * x / 3.0 - x * x * x / 4.0
    return math.log(tau) / x


def f_upper(a: float, tau: float) -> float:
    _positive("a", a)
    _positive("tau", tau)
    if tau <= 0.5:
        return min(4.0, 4.0 * a)
    if tau <= 1.0:
        return min(4.0 * a, 2.0 * math.pi**2 / 3.0)
    return min(4.0 * a, 2.0 * math.pi**2 * tau / 3.0, 4.0 * (tau + 1.0))


def g_lower(a: float, tau: float) -> float:
    _positive("a", a)
    _positive("tau", tau)
    first = 4.0 * a * math.exp(-2.0 * a * I(tau))
    if tau <= 1.0:
        return max(first, 4.0 * a * tau / (a + tau))
    return max(first, 4.0 * a / (a + 1.0))


def mass_lower_envelope(a: float, tau: float) -> float:
    """``4 a exp(-2 a I(tau))``, the mass lower bound maximised at ``a_star``."""
    return 4.0 * a * math.exp(-2.0 * a * I(tau))


def h(y, tau: float):
    """``a y h(y; tau)`` bounds ``S``; ``h(0; tau) = 1``."""
    _positive("tau", tau)
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("y must be non-negative")
    x = tau - 1.0
    with np.errstate(invalid="ignore", divide="ignore"):
        # (exp(-y/4) - exp(-tau y/4)) / (y (tau - 1)) without cancellation
        ratio = np.where(
            x * y == 0.0, 0.25, -np.expm1(-0.25 * x * y) / np.where(x * y == 0.0, 1.0, x * y)
        )
    out = 4.0 * np.exp(-0.25 * y) * ratio
    return float(out) if out.ndim == 0 else out


def g_point(y, a: float, tau: float):
    """Sharper profile bound: ``S(y) <= a y g(y; a, tau)``; ``g(0) = 1``."""
    _positive("a", a)
    _positive("tau", tau)
    y = np.asarray(y, dtype=float)
    if np.any(y < 0):
        raise ValueError("y must be non-negative")
    k = tau if tau <= 1.0 else 1.0
    with np.errstate(over="ignore"):
        z = 0.25 * k * y
        out = k / (k * np.exp(z) + a * np.expm1(z))
    return float(out) if out.ndim == 0 else out


def j(tau: float) -> Union[float, Unbounded]:
    """Largest shooting parameter for which ``tau S / 2 <= 1`` is guaranteed."""
    _positive("tau", tau)
    if tau <= 0.5:
        return UNBOUNDED
    e = math.exp(1.0 - 1.0 / (2.0 * tau))
    base = e / (2.0 * tau - e)
    return tau * base if tau <= 1.0 else base


def a_star(tau: float) -> float:
    return 1.0 / (2.0 * I(tau))


def tau_bar() -> float:
    """The ``tau`` at which ``I(tau) = 1 / (2e)``."""
    return brentq(lambda t: I(t) - 1.0 / (2.0 * math.e), 2.0, 100.0, xtol=1e-14, rtol=1e-15)


# ---------------------------------------------------------------------------
# profile checker


@dataclass
class BoundEntry:
    name: str
    kind: str  # scalar_bound | pointwise_bound | identity
    passed: bool
    worst_slack: float
    location: Optional[float] = None
    applicable: bool = True
    enforced: bool = True
    note: str = ""

    def to_dict(self):
        d = asdict(self)
        for key in ("worst_slack", "location"):
            v = d[key]
            if isinstance(v, float) and not math.isfinite(v):
                d[key] = None
        return d


@dataclass
class BoundsReport:
    a: float
    tau: float
    entries: list = field(default_factory=list)
    header: str = ""

    @property
    def passed(self) -> bool:
        return all(e.passed for e in self.entries if e.enforced and e.applicable)

    def failures(self):
        return [e for e in self.entries if e.enforced and e.applicable and not e.passed]

    def names(self):
        return [e.name for e in self.entries]

    def __getitem__(self, name):
        for e in self.entries:
            if e.name == name:
                return e
        raise KeyError(name)

    def to_json(self) -> str:
        return json.dumps([e.to_dict() for e in self.entries], indent=2)

    def to_table(self) -> str:
        lines = [self.header, f"{'bound':<32} {'kind':<16} {'status':<8} {'worst slack':>14}  at"]
        for e in self.entries:
            if not e.applicable:
                status = "n/a"
            elif not e.enforced:
                status = "info"
            else:
                status = "pass" if e.passed else "FAIL"
            slack = "" if not math.isfinite(e.worst_slack) else f"{e.worst_slack:.6g}"
            loc = "" if e.location is None else f"{e.location:.6g}"
            lines.append(f"{e.name:<32} {e.kind:<16} {status:<8} {slack:>14}  {loc}")
        return "\n".join(lines)


class _Checker:
    def __init__(self, y, mask):
        self.y = y
        self.mask = mask
        self.entries = []

    def pointwise(self, name, lower, upper, *, applicable=True, enforced=True, note=""):
        """Record ``lower <= upper`` at every checked node."""
        if not applicable:
            self.entries.append(
                BoundEntry(name, "pointwise_bound", True, math.nan, None, False, enforced, note)
            )
            return
        gap = np.asarray(upper - lower, dtype=float)[self.mask]
        y = self.y[self.mask]
        i = int(np.argmin(gap))
        self.entries.append(
            BoundEntry(
                name, "pointwise_bound", bool(gap[i] >= -SLACK), float(gap[i]), float(y[i]),
                True, enforced, note,
            )
        )

    def scalar(self, name, lower, upper, *, applicable=True, enforced=True, note=""):
        if not applicable:
            self.entries.append(
                BoundEntry(name, "scalar_bound", True, math.nan, None, False, enforced, note)
            )
            return
        gap = float(upper - lower)
        self.entries.append(
            BoundEntry(name, "scalar_bound", bool(gap >= -SLACK), gap, None, True, enforced, note)
        )

    def identity(self, name, residual, tol, location=None, note=""):
        self.entries.append(
            BoundEntry(name, "identity", bool(abs(residual) <= tol), float(tol - abs(residual)), location,
                       True, True, note)
        )


def check_all(profile: CumulatedProfile, derived: DerivedQuantities) -> BoundsReport:
    """Evaluate every a-priori estimate on one solved profile.

    Strict inequalities are tested as non-strict with an absolute slack of
    ``1e-8``. Pointwise bounds are checked from ``y = 2 eps`` on, where the
    seed expansion no longer dominates.
    """
    prm = profile.params
    a, tau, eps = prm.a, prm.tau, prm.eps
    y = profile.grid
    phi, p, S, q = profile.phi, profile.dphi, profile.S, profile.q
    m = derived.mass_over_2pi
    sigma, l, v0 = derived.sigma, derived.l, derived.v0
    It = I(tau)
    k = min(1.0, tau)
    mask = y >= 2.0 * eps
    ck = _Checker(y, mask)

    with np.errstate(over="ignore", divide="ignore", invalid="ignore"):
        e4 = np.exp(-0.25 * y)
        et = np.exp(-0.25 * tau * y)
        E4 = np.exp(0.25 * y)

        # preliminary shape
        ck.pointwise("phi_increasing", 0.0, p)
        ck.pointwise("phi_concave", profile.ddphi, 0.0)
        ck.pointwise("S_positive", 0.0, S)
        ck.pointwise("S_below_phi", S, phi)
        ck.pointwise("S_above_damped_phi", et * phi, S)
        ck.pointwise("S_above_dphi_average", (4.0 / tau) * p * (-np.expm1(-0.25 * tau * y)), S)
        ck.pointwise("S_below_phi_average", S, 0.5 * phi * (1.0 + et))

        # phi' and phi
        dq = np.diff(q)
        monotone = np.concatenate(([0.0], -dq))  # q[i-1] - q[i] >= 0
        ck.pointwise("scaled_dphi_nonincreasing", 0.0, monotone)
        ck.pointwise("scaled_dphi_between_l_and_a", l, np.minimum(q - l, a - q) + l)
        one_m = -np.expm1(-0.25 * y)
        ck.pointwise("phi_between_l_and_a_envelopes", 4.0 * l * one_m, np.minimum(phi - 4.0 * l * one_m, 4.0 * a * one_m - phi) + 4.0 * l * one_m)
        lower3 = np.maximum(m * one_m, y / ((1.0 + 1.0 / a) * E4 - 1.0))
        upper3 = np.minimum(4.0 * a * one_m, m)
        ck.pointwise("phi_between_mass_envelopes", 0.0, np.minimum(phi - lower3, upper3 - phi))
        denom = (1.0 + 1.0 / a) * E4 - 1.0
        ck.pointwise(
            "S_below_rational_below_phi",
            0.0,
            np.minimum(phi - 4.0 * np.expm1(0.25 * y) / denom, y / denom - S),
            applicable=tau >= 1.0,
            note="S <= y/((1+1/a)e^{y/4}-1) <= 4(e^{y/4}-1)/((1+1/a)e^{y/4}-1) <= phi for tau >= 1",
        )

        # S from above
        ck.pointwise("S_below_h_profile", S, a * y * h(y, tau))
        ck.pointwise("S_below_g_profile", S, a * y * g_point(y, a, tau))
        ck.pointwise("S_uniform_bound", S, k * y / np.expm1(0.25 * k * y))

        # phi' from below
        ck.pointwise("dphi_above_exponential", a * e4 * math.exp(-2.0 * a * It), p)
        ck.pointwise(
            "dphi_above_rational_tau_ge_1",
            a * E4 / ((1.0 + a) * E4 - a) ** 2,
            p,
            applicable=tau >= 1.0,
        )
        Et = np.exp(0.25 * tau * y)
        ck.pointwise(
            "dphi_above_rational_tau_lt_1",
            a * e4 * Et * Et / ((a / tau + 1.0) * Et - a / tau) ** 2,
            p,
            applicable=tau < 1.0,
        )

        # integral representation of phi'
        running = a * eps + cumulative_quadrature(y, *_s_over_y(profile))
        represented = a * np.exp(-0.5 * running)  # = exp(y/4) phi'
        rel = np.abs(q / represented - 1.0)
        i = int(np.argmax(rel))
        ck.identity("dphi_integral_representation", float(rel[i]), REPRESENTATION_TOL, float(y[i]),
                    note="exp(y/4) phi'(y) = a exp(-1/2 int_0^y S/z dz), relative")

        # decay of v
        v = v_profile(profile, derived)
        C = sigma * math.exp(v0) / k
        ck.pointwise("v_gaussian_decay", v, C * np.exp(-0.25 * k * y),
                     note=f"C = sigma e^v(0) / min(1,tau) = {C:.6g}")

    # sufficient condition tau S / 2 <= 1 and its consequence
    jt = j(tau)
    sc_guaranteed = tau <= 0.5 or a <= jt
    in_prop = a <= jt or a <= 1.0
    ck.pointwise(
        "tau_S_half_at_most_1",
        0.5 * tau * S,
        1.0,
        applicable=in_prop,
        enforced=sc_guaranteed,
        note="guaranteed when tau <= 1/2 or a <= j(tau); informational for j(tau) < a <= 1",
    )

    # scalar bounds on v(0), sigma and the mass
    ck.scalar("v0_upper_by_sigma", v0, sigma * math.exp(v0) * It)
    ck.scalar("v0_upper_by_a", v0, 2.0 * a * It)
    ck.scalar("v0_lower_log", math.log(2.0 * a * It + 1.0), v0)
    ck.identity("sigma_exp_v0_is_2a", sigma * math.exp(v0) / (2.0 * a) - 1.0, REPRESENTATION_TOL,
                note="sigma e^{v(0)} = 2a, relative")
    sig_lo = 2.0 * a * math.exp(-2.0 * a * It)
    sig_hi = min(0.5 * m, 2.0 * a / (2.0 * a * It + 1.0))
    ck.scalar("sigma_bracket", 0.0, min(sigma - sig_lo, sig_hi - sigma))
    ck.scalar("mass_above_twice_sigma", 0.0, min(m - 2.0 * sigma, 2.0 * sigma - 4.0 * a * math.exp(-2.0 * a * It)))
    ck.scalar("mass_between_4l_and_4a", 0.0, min(0.25 * m - l, a - 0.25 * m))
    ck.scalar("mass_envelope", 0.0, min(m - g_lower(a, tau), f_upper(a, tau) - m))
    ck.scalar("mass_above_exponential_envelope", mass_lower_envelope(a, tau), m)
    ck.scalar("mass_lower_tau_1", 2.0 * (1.0 - math.exp(-2.0 * a)), m, applicable=tau == 1.0)
    ck.scalar("mass_lower_tau_ge_1", 4.0 * a / (a + 1.0), m, applicable=tau >= 1.0)
    ck.scalar("mass_lower_tau_lt_1", 4.0 * a * tau / (a + tau), m, applicable=tau < 1.0)
    if tau <= 0.5:
        cap = 4.0
    elif tau <= 1.0:
        cap = 2.0 * math.pi**2 / 3.0
    else:
        cap = min(2.0 * math.pi**2 * tau / 3.0, 4.0 * (tau + 1.0))
    ck.scalar("mass_upper_by_tau", m, cap)
    ck.scalar("l_lower_bound", a / (1.0 + a / k) ** 2, l)
    ck.scalar("mass_below_4_min_1_a", m, 4.0 * min(1.0, a), applicable=in_prop)

    # remark on the excluded window for v(0)
    sI = sigma * It
    if sI < 1.0 / math.e:
        x1 = float(-lambertw(-sI, 0).real)
        x2 = float(-lambertw(-sI, -1).real)
        outside = not (x1 < v0 < x2)
        ck.entries.append(
            BoundEntry("v0_excluded_window", "scalar_bound", outside, min(abs(v0 - x1), abs(v0 - x2)), None,
                       True, False, f"v(0) excluded from ({x1:.6g}, {x2:.6g})")
        )
    else:
        ck.entries.append(
            BoundEntry("v0_excluded_window", "scalar_bound", True, math.nan, None, False, False,
                       "sigma I(tau) >= 1/e: no excluded window")
        )

    # identities
    ck.identity("mass_consistency", derived.consistency, CONSISTENCY_TOL,
                note="phi(inf) vs tau/4 int S, relative")
    R = mass_identity_residual(profile, derived)
    ck.identity("mass_identity", R, IDENTITY_TOL * max(1.0, m * m),
                note="m^2 - 4m - int phi'(2phi - 2S - y) dy")

    header = (
        f"bounds for a={a:.12g} tau={tau:.12g}: m=M/2pi={m:.12g}; "
        f"pointwise checks start at y=2eps={2 * eps:.3g}; slack {SLACK:g}"
    )
    return BoundsReport(a=a, tau=tau, entries=ck.entries, header=header)
