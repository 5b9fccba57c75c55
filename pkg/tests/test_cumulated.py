import math
import warnings

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ksselfsim.cumulated import (
    CumulatedParams,
    InvalidSeedError,
    SeedResolutionWarning,
    auto_y_max,
    derive,
    mass_fraction,
    mass_identity_residual,
    reconstruct,
    seed,
    solve,
)

# Terminal state at y = 30 of tests/oracles.py::rk4_cumulated(1, 1), step 1e-5.
ORACLE_A1_T1_Y30 = (2.0244198850220956, 0.00014966362340515385, 0.005348931012392677)


# seed -----------------------------------------------------------------------


def test_first_order_seed_values():
    _, (phi, dphi, S) = seed(CumulatedParams(a=1.0, tau=1.0), order=1)
    assert dphi == pytest.approx(1 - 0.75e-6, abs=1e-16)
    assert phi == pytest.approx(1e-6 - 3.75e-13, abs=1e-19)
    assert S == 1e-6


def test_first_order_seed_large_a():
    _, (_, dphi, _) = seed(CumulatedParams(a=10.0, tau=1.0), order=1)
    assert dphi == pytest.approx(10 - 5.25e-5, abs=1e-12)


def test_second_order_seed_refines_first():
    prm = CumulatedParams(a=10.0, tau=2.0)
    _, s1 = seed(prm, order=1)
    y0, s2 = seed(prm)
    assert y0 == prm.eps
    # the two expansions differ only at the next order in eps
    for u, v in zip(s1, s2):
        assert abs(u - v) <= 10 * (1 + 2 * 10.0) ** 2 * prm.eps**2


def test_seed_relative_offset_bound():
    for a in (0.1, 1.0, 100.0):
        prm = CumulatedParams(a=a, tau=1.0)
        _, (_, dphi, _) = seed(prm, order=1)
        assert (a - dphi) / a <= (1 + 2 * a) * prm.eps / 4 * (1 + 1e-12)


def test_seed_limit_recovers_initial_conditions():
    _, (phi, dphi, S) = seed(CumulatedParams(a=3.0, tau=1.0, eps=1e-15))
    assert phi == pytest.approx(0.0, abs=1e-14)
    assert dphi == pytest.approx(3.0, rel=1e-13)
    assert S == pytest.approx(0.0, abs=1e-14)


def test_invalid_seed():
    with pytest.raises(InvalidSeedError):
        seed(CumulatedParams(a=1e4, tau=1.0, eps=0.5), order=1)


def test_seed_resolution_warning():
    with pytest.warns(SeedResolutionWarning):
        seed(CumulatedParams(a=1e5, tau=1.0))
    with warnings.catch_warnings():
        warnings.simplefilter("error")
        seed(CumulatedParams(a=1e4, tau=1.0))


@pytest.mark.parametrize(
    "kw",
    [dict(a=0.0, tau=1.0), dict(a=1.0, tau=-1.0), dict(a=1.0, tau=1.0, eps=1.5),
     dict(a=1.0, tau=1.0, y_max=0.5), dict(a=1.0, tau=1.0, seed_order=3),
     dict(a=math.inf, tau=1.0)],
)
def test_param_validation(kw):
    with pytest.raises(ValueError):
        CumulatedParams(**kw)


def test_auto_truncation():
    assert auto_y_max(1.0) == 120.0
    assert auto_y_max(10.0) == 120.0
    assert auto_y_max(0.05) == pytest.approx(2400.0)
    assert CumulatedParams(a=1, tau=1, y_max=30).resolved_y_max == 30.0


# solve ----------------------------------------------------------------------


def test_matches_fixed_step_oracle():
    prof = solve(CumulatedParams(a=1.0, tau=1.0, y_max=30.0))
    assert prof.grid[-1] == 30.0
    got = (prof.phi[-1], prof.dphi[-1], prof.S[-1])
    for g, o in zip(got, ORACLE_A1_T1_Y30):
        assert abs(g - o) < 1e-6


def test_small_a_mass_bound():
    prof = solve(CumulatedParams(a=0.5, tau=1.0))
    assert prof.phi[-1] < 2.0


def test_profile_immutable_and_deterministic():
    prm = CumulatedParams(a=2.0, tau=0.7)
    p1, p2 = solve(prm), solve(prm)
    assert np.array_equal(p1.grid, p2.grid) and np.array_equal(p1.S, p2.S)
    with pytest.raises(ValueError):
        p1.phi[0] = 1.0


def test_csv_rows():
    prof = solve(CumulatedParams(a=1.0, tau=1.0))
    rows = list(prof.to_csv_rows())
    assert len(rows) == prof.grid.size
    assert rows[0] == (prof.grid[0], prof.phi[0], prof.dphi[0], prof.S[0])


@settings(max_examples=25, deadline=None)
@given(st.floats(-2.0, 3.0), st.floats(-1.3, 3.0))
def test_profile_invariants(log_a, log_tau):
    a, tau = 10.0**log_a, 10.0**log_tau
    prof = solve(CumulatedParams(a=a, tau=tau))
    d = derive(prof)
    slack = 1e-8
    interior = prof.grid >= 2 * prof.params.eps
    assert np.all(prof.dphi > 0)
    assert np.all(prof.ddphi[interior] < slack)
    assert np.all(prof.S > 0)
    assert np.all(prof.S[interior] < prof.phi[interior] + slack)
    assert np.all(np.diff(prof.q) <= slack)
    assert d.l <= a
    assert d.consistency < 1e-5
    # S'(eps) ~ a
    assert prof.dS[0] == pytest.approx(a, rel=(1 + 2 * a + tau) * prof.params.eps)
    y = prof.grid[interior]
    m = d.mass_over_2pi
    lower = np.maximum(m * -np.expm1(-y / 4), y / ((1 + 1 / a) * np.exp(y / 4) - 1))
    upper = np.minimum(4 * a * -np.expm1(-y / 4), m)
    assert np.all(prof.phi[interior] >= lower - slack)
    assert np.all(prof.phi[interior] <= upper + slack)


# derive ---------------------------------------------------------------------


def test_tiny_a_mass():
    d = derive(solve(CumulatedParams(a=1e-4, tau=1.0)))
    assert d.mass_over_2pi < 4e-4


def test_unit_case_bounds():
    d = derive(solve(CumulatedParams(a=1.0, tau=1.0)))
    assert d.mass_over_2pi >= 2 * (1 - math.exp(-2))
    assert d.v0 > math.log(3.0)
    assert d.sigma == 2 * d.l
    assert d.mass == pytest.approx(2 * math.pi * d.mass_over_2pi)


def test_sigma_times_exp_v0_is_2a():
    for a, tau in ((0.3, 0.05), (5.0, 1.0), (200.0, 30.0)):
        d = derive(solve(CumulatedParams(a=a, tau=tau)))
        assert d.sigma * math.exp(d.v0) == pytest.approx(2 * a, rel=1e-7)


def test_mass_identity_residual_small():
    for a, tau in ((0.5, 0.2), (10.0, 10.0), (1e3, 1.0)):
        prof = solve(CumulatedParams(a=a, tau=tau))
        d = derive(prof)
        assert abs(mass_identity_residual(prof, d)) < 1e-6 * max(1.0, d.mass_over_2pi**2)


def test_tail_correction_changes_little_with_y_max():
    short = derive(solve(CumulatedParams(a=1.0, tau=1.0, y_max=30.0)))
    long = derive(solve(CumulatedParams(a=1.0, tau=1.0)))
    assert short.mass_over_2pi == pytest.approx(long.mass_over_2pi, rel=1e-7)
    assert short.v0 == pytest.approx(long.v0, rel=1e-3)


# reconstruct ----------------------------------------------------------------


def test_reconstruct_origin_value():
    prof = solve(CumulatedParams(a=1.5, tau=1.0))
    u, _ = reconstruct(prof, [math.sqrt(prof.params.eps)])
    assert u[0] == pytest.approx(3.0, rel=1e-5)


@pytest.mark.parametrize("a,tau", [(1.0, 1.0), (0.1, 0.05), (100.0, 10.0)])
def test_reconstruct_sigma_constant(a, tau):
    prof = solve(CumulatedParams(a=a, tau=tau))
    d = derive(prof)
    r = np.linspace(math.sqrt(prof.params.eps), math.sqrt(prof.grid[-1]) * (1 - 1e-12), 800)
    u, v = reconstruct(prof, r, d)
    c = u * np.exp(r * r / 4 - v)
    assert (c.max() - c.min()) / c.mean() < 1e-4
    assert c.mean() == pytest.approx(d.sigma, rel=1e-4)
    assert np.all(u > 0) and np.all(v > 0)
    assert np.all(np.diff(u) <= 0) and np.all(np.diff(v) <= 0)


def test_reconstruct_out_of_range():
    prof = solve(CumulatedParams(a=1.0, tau=1.0, y_max=30.0))
    with pytest.raises(ValueError):
        reconstruct(prof, [6.0])
    with pytest.raises(ValueError):
        reconstruct(prof, [1e-4])


def test_mass_fraction_monotone():
    prof = solve(CumulatedParams(a=10.0, tau=1.0))
    d = derive(prof)
    f = [mass_fraction(prof, d, y) for y in (0.1, 1.0, 10.0, 120.0)]
    assert all(b > a for a, b in zip(f, f[1:]))
    assert f[-1] == pytest.approx(1.0, abs=1e-9)


def test_params_to_dict_resolves_truncation():
    d = CumulatedParams(a=1.0, tau=0.5).to_dict()
    assert d["y_max"] == 240.0
    assert d["integration"]["abs_tol"] == 1e-10
