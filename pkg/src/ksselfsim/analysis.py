"""Bifurcation-level computations built on repeated profile solves.

Masses are reported in units of ``2 pi`` (``4`` is the critical mass ``8 pi``).
Every sweep evaluates independent solves through :func:`parallel_map`, which
returns results in input order regardless of worker scheduling.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, replace
from functools import partial
from typing import Optional, Sequence

import numpy as np
from scipy.optimize import brentq, minimize_scalar

from .bounds import I, f_upper, g_lower
from .cumulated import (
    CumulatedParams,
    derive,
    mass_fraction,
    mass_identity_residual,
    solve,
)
from .wmodel import WParams, derive_w, solve_w

__all__ = [
    "MassSample",
    "MassCurve",
    "MStarResult",
    "MultiplicityResult",
    "DiracRow",
    "DiracReport",
    "SDiagramRow",
    "parallel_map",
    "mass_curve",
    "m_star",
    "tau_star",
    "multiplicity",
    "dirac_diagnostic",
    "s_diagram",
]

CRITICAL = 4.0
MSTAR_WINDOW = (1e-3, 1e4)
MSTAR_SAMPLES = 200
MULTIPLICITY_SAMPLES = 400
TAU_STAR_TOL = 1e-4
ROOT_TOL = 1e-6
GOLDEN_TOL = 1e-6  # relative width in log a
IDENTITY_TOL = 1e-4
S_GRID_DEFAULT = (-10.0, 20.0)


def parallel_map(fn, items, jobs: int = 1):
    """``list(map(fn, items))``, optionally over a process pool of ``jobs`` workers."""
    items = list(items)
    if jobs < 1:
        raise ValueError("jobs must be at least 1")
    if jobs == 1 or len(items) < 2:
        return [fn(x) for x in items]
    chunk = max(1, len(items) // (4 * jobs))
    with ProcessPoolExecutor(max_workers=jobs) as pool:
        return list(pool.map(fn, items, chunksize=chunk))


def _template(tau: float, template: Optional[CumulatedParams]) -> CumulatedParams:
    if template is None:
        return CumulatedParams(a=1.0, tau=tau)
    return replace(template, tau=tau)


@dataclass(frozen=True)
class MassSample:
    a: float
    mass_over_2pi: float
    sigma: float
    v0: float
    error: Optional[str] = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _mass_sample(a: float, template: CumulatedParams) -> MassSample:
    try:
        d = derive(solve(replace(template, a=a)))
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        return MassSample(a, math.nan, math.nan, math.nan, f"{type(exc).__name__}: {exc}")
    if not math.isfinite(d.mass_over_2pi):
        return MassSample(a, math.nan, math.nan, math.nan, "non-finite mass")
    return MassSample(float(a), float(d.mass_over_2pi), float(d.sigma), float(d.v0))


def _mass_at(a: float, template: CumulatedParams) -> float:
    return float(derive(solve(replace(template, a=a))).mass_over_2pi)


@dataclass
class MassCurve:
    tau: float
    samples: list
    argmax_a: float
    max_mass_over_2pi: float
    refined: bool = False

    @property
    def failures(self):
        return [s for s in self.samples if not s.ok]

    def envelope_violations(self, slack: float = 1e-8):
        """Samples outside ``g_lower <= m <= f_upper``."""
        out = []
        for s in self.samples:
            if s.ok and not (
                g_lower(s.a, self.tau) - slack <= s.mass_over_2pi <= f_upper(s.a, self.tau) + slack
            ):
                out.append(s)
        return out

    def rows(self):
        return [(s.a, s.mass_over_2pi, s.sigma, s.v0) for s in self.samples]


def _refine_max(i, a_ok, m_ok, template):
    """Golden-section search for the maximum on the bracketing triple around sample ``i``."""
    la, lb, lc = (math.log(a_ok[k]) for k in (i - 1, i, i + 1))
    res = minimize_scalar(
        lambda x: -_mass_at(math.exp(x), template),
        bracket=(la, lb, lc),
        method="golden",
        tol=GOLDEN_TOL,
    )
    a_best = math.exp(res.x)
    m_best = -res.fun
    if m_best >= m_ok[i] and la <= res.x <= lc:
        return a_best, m_best
    return a_ok[i], m_ok[i]


def mass_curve(
    tau: float,
    a_grid: Sequence[float],
    *,
    refine: bool = True,
    jobs: int = 1,
    template: Optional[CumulatedParams] = None,
) -> MassCurve:
    """Sample ``a -> M(a, tau) / 2 pi`` and locate its maximum."""
    a_grid = np.asarray(a_grid, dtype=float)
    if a_grid.ndim != 1 or a_grid.size < 3:
        raise ValueError("a_grid needs at least three values")
    if np.any(a_grid <= 0) or np.any(np.diff(a_grid) <= 0):
        raise ValueError("a_grid must be positive and strictly increasing")
    tmpl = _template(tau, template)
    samples = parallel_map(partial(_mass_sample, template=tmpl), a_grid.tolist(), jobs)
    good = [s for s in samples if s.ok]
    if len(good) < 3:
        raise RuntimeError(f"only {len(good)} of {len(samples)} solves succeeded at tau={tau}")
    a_ok = [s.a for s in good]
    m_ok = [s.mass_over_2pi for s in good]
    i = int(np.argmax(m_ok))
    refined = False
    argmax, mmax = a_ok[i], m_ok[i]
    if refine and 0 < i < len(good) - 1:
        argmax, mmax = _refine_max(i, a_ok, m_ok, tmpl)
        refined = True
    return MassCurve(tau, samples, float(argmax), float(mmax), refined)


@dataclass(frozen=True)
class MStarResult:
    tau: float
    mass_over_2pi: float
    argmax_a: Optional[float]
    window_max: float
    window_argmax: float
    # True when the window maximum exceeds the asymptotic value 4
    attained: bool
    window: tuple = MSTAR_WINDOW

    def to_dict(self):
        return asdict(self)


def m_star(
    tau: float,
    *,
    window: tuple = MSTAR_WINDOW,
    samples: int = MSTAR_SAMPLES,
    jobs: int = 1,
    template: Optional[CumulatedParams] = None,
) -> MStarResult:
    """Numerical ``sup_a M(a, tau) / 2 pi`` over a log-spaced window.

    The supremum is never below 4, because the mass tends to ``8 pi`` as
    ``a -> inf``. When the window maximum stays below 4 the supremum is that
    limit, is not attained, and ``argmax_a`` is ``None``.
    """
    if not tau > 0:
        raise ValueError("tau must be positive")
    lo, hi = window
    if not 0 < lo < hi:
        raise ValueError("window must satisfy 0 < lo < hi")
    curve = mass_curve(tau, np.geomspace(lo, hi, samples), jobs=jobs, template=template)
    if not math.isfinite(curve.max_mass_over_2pi):
        raise RuntimeError(f"mass curve at tau={tau} is not finite")
    attained = bool(curve.max_mass_over_2pi > CRITICAL)
    return MStarResult(
        tau=tau,
        mass_over_2pi=max(curve.max_mass_over_2pi, CRITICAL),
        argmax_a=curve.argmax_a if attained else None,
        window_max=curve.max_mass_over_2pi,
        window_argmax=curve.argmax_a,
        attained=attained,
        window=(lo, hi),
    )


def tau_star(
    lo: float,
    hi: float,
    width: float = 0.02,
    *,
    tol: float = TAU_STAR_TOL,
    jobs: int = 1,
    template: Optional[CumulatedParams] = None,
    **mstar_kw,
):
    """Bisection bracket ``(lo, hi)`` of the smallest ``tau`` with ``m_star > 4 + tol``.

    Returns ``(lo, hi, history)`` where ``history`` lists every probed
    ``(tau, m_star)`` pair.
    """
    if not 0 < lo < hi:
        raise ValueError("need 0 < lo < hi")
    if not width > 0:
        raise ValueError("width must be positive")

    history = []

    def above(t):
        r = m_star(t, jobs=jobs, template=template, **mstar_kw)
        history.append((t, r.mass_over_2pi))
        return r.mass_over_2pi > CRITICAL + tol

    if above(lo):
        raise ValueError(f"m_star({lo}) already exceeds {CRITICAL} + {tol}: no transition in bracket")
    if not above(hi):
        raise ValueError(f"m_star({hi}) does not exceed {CRITICAL} + {tol}: no transition in bracket")
    while hi - lo >= width:
        mid = 0.5 * (lo + hi)
        if above(mid):
            hi = mid
        else:
            lo = mid
    return lo, hi, history


@dataclass
class MultiplicityResult:
    tau: float
    target_mass_over_2pi: float
    roots: list
    residuals: list = field(default_factory=list)
    m_star: Optional[float] = None
    grid: tuple = ()


def multiplicity(
    tau: float,
    target: float,
    *,
    a_hi: float = MSTAR_WINDOW[1],
    samples: int = MULTIPLICITY_SAMPLES,
    jobs: int = 1,
    template: Optional[CumulatedParams] = None,
    check_m_star: bool = True,
) -> MultiplicityResult:
    """All ``a`` with ``M(a, tau) / 2 pi = target`` visible on a log grid.

    The grid starts at ``a = target / 4``, below which the mass cannot reach
    the target (``M / 2 pi <= 4 a``). Roots closer together than the grid
    spacing can merge.
    """
    if not (tau > 0 and target > 0):
        raise ValueError("tau and target must be positive")
    ms = None
    if check_m_star:
        ms = m_star(tau, jobs=jobs, template=template).mass_over_2pi
        if target >= ms:
            raise ValueError(f"target {target} is not below m_star({tau}) = {ms:.12g}")
    tmpl = _template(tau, template)
    a_lo = target / 4.0
    if not a_lo < a_hi:
        raise ValueError("target too large for the search window")
    grid = np.geomspace(a_lo, a_hi, samples)
    values = parallel_map(partial(_mass_sample, template=tmpl), grid.tolist(), jobs)
    roots, residuals = [], []
    for left, right in zip(values[:-1], values[1:]):
        if not (left.ok and right.ok):
            continue
        fl, fr = left.mass_over_2pi - target, right.mass_over_2pi - target
        if fl == 0.0:
            root = left.a
        elif fl * fr < 0:
            x = brentq(
                lambda la: _mass_at(math.exp(la), tmpl) - target,
                math.log(left.a),
                math.log(right.a),
                xtol=1e-14,
                rtol=4 * np.finfo(float).eps,
            )
            root = math.exp(x)
        else:
            continue
        roots.append(root)
        residuals.append(abs(_mass_at(root, tmpl) - target))
    return MultiplicityResult(tau, target, roots, residuals, ms, (a_lo, a_hi, samples))


@dataclass(frozen=True)
class DiracRow:
    a: float
    mass_over_2pi: float
    v0: float
    v0_lower: float
    identity_residual: float
    inner_fraction: float


def _dirac_row(a, template):
    prof = solve(replace(template, a=a))
    d = derive(prof)
    return DiracRow(
        a=a,
        mass_over_2pi=d.mass_over_2pi,
        v0=d.v0,
        v0_lower=math.log(2.0 * a * I(template.tau) + 1.0),
        identity_residual=mass_identity_residual(prof, d),
        inner_fraction=mass_fraction(prof, d, 1.0),
    )


@dataclass
class DiracReport:
    tau: float
    rows: list

    @property
    def gaps(self):
        return [abs(r.mass_over_2pi - CRITICAL) for r in self.rows]

    @property
    def gap_shrinking(self) -> bool:
        g = self.gaps
        return all(b < a for a, b in zip(g[:-1], g[1:]))

    @property
    def v0_increasing(self) -> bool:
        return all(b.v0 > a.v0 for a, b in zip(self.rows[:-1], self.rows[1:]))

    @property
    def v0_above_lower(self) -> bool:
        return all(r.v0 > r.v0_lower for r in self.rows)

    @property
    def identity_ok(self) -> bool:
        return all(
            abs(r.identity_residual) <= IDENTITY_TOL * max(1.0, r.mass_over_2pi**2) for r in self.rows
        )

    @property
    def concentrating(self) -> bool:
        f = [r.inner_fraction for r in self.rows]
        return all(b >= a for a, b in zip(f[:-1], f[1:]))

    def summary(self) -> dict:
        return {
            "gap_shrinking": self.gap_shrinking,
            "v0_increasing": self.v0_increasing,
            "v0_above_lower_bound": self.v0_above_lower,
            "identity_within_tolerance": self.identity_ok,
            "inner_fraction_nondecreasing": self.concentrating,
        }


def dirac_diagnostic(
    tau: float,
    a_sequence: Sequence[float],
    *,
    jobs: int = 1,
    template: Optional[CumulatedParams] = None,
) -> DiracReport:
    """Track mass, ``v(0)``, the mass identity and the share of mass in
    ``y <= 1`` along increasing ``a``."""
    a_seq = [float(a) for a in a_sequence]
    if not a_seq or any(a <= 0 for a in a_seq) or any(b <= a for a, b in zip(a_seq[:-1], a_seq[1:])):
        raise ValueError("a_sequence must be positive and strictly increasing")
    rows = parallel_map(partial(_dirac_row, template=_template(tau, template)), a_seq, jobs)
    return DiracReport(tau, rows)


@dataclass(frozen=True)
class SDiagramRow:
    s: float
    log_sigma: float
    log_v0: float
    mass: float
    log1p_mass: float
    error: Optional[str] = None


def _s_row(s, tau, template):
    try:
        prm = WParams(s=s, tau=tau) if template is None else replace(template, s=s, tau=tau)
        d = derive_w(solve_w(prm))
    except (ArithmeticError, ValueError, RuntimeError) as exc:
        nan = math.nan
        return SDiagramRow(s, nan, nan, nan, nan, f"{type(exc).__name__}: {exc}")
    log_v0 = math.log(d.v0) if d.v0 > 0 else math.nan
    return SDiagramRow(s, d.w_inf, log_v0, d.mass, math.log1p(d.mass))


def s_diagram(
    tau: float,
    s_grid: Optional[Sequence[float]] = None,
    *,
    jobs: int = 1,
    template: Optional[WParams] = None,
):
    """Rows ``(s, log sigma, log v(0), M, log(1 + M))`` over the shooting values."""
    if not tau > 0:
        raise ValueError("tau must be positive")
    if s_grid is None:
        s_grid = np.linspace(*S_GRID_DEFAULT, 301)
    return parallel_map(partial(_s_row, tau=tau, template=template), [float(s) for s in s_grid], jobs)
