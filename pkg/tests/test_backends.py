import importlib
import sys

import numpy as np
import pytest

from ksselfsim import backend
from ksselfsim.cumulated import CumulatedParams, solve
from ksselfsim.integrator import IntegrationConfig
from ksselfsim.wmodel import WParams, solve_w

compiled = pytest.mark.skipif(
    "compiled" not in backend.available_backends(), reason="extension not built"
)


@compiled
@pytest.mark.parametrize("a,tau", [(0.1, 0.05), (1.0, 1.0), (37.0, 3.0), (1e3, 1e3)])
def test_cumulated_backends_bit_identical(a, tau):
    prm = CumulatedParams(a=a, tau=tau)
    with backend.use_backend("compiled"):
        c = solve(prm)
    with backend.use_backend("python"):
        p = solve(prm)
    assert np.array_equal(c.grid, p.grid)
    for name in ("phi", "dphi", "S"):
        assert np.array_equal(getattr(c, name), getattr(p, name))


@compiled
@pytest.mark.parametrize("s,tau", [(-5.0, 0.1), (0.0, 1.0), (8.0, 10.0)])
def test_radial_backends_bit_identical(s, tau):
    prm = WParams(s=s, tau=tau)
    with backend.use_backend("compiled"):
        c = solve_w(prm)
    with backend.use_backend("python"):
        p = solve_w(prm)
    assert np.array_equal(c.grid, p.grid)
    assert np.array_equal(c.w, p.w)
    assert np.array_equal(c.mass_running, p.mass_running)


@pytest.mark.parametrize("name", ["compiled", "python"])
def test_failure_is_raised_not_truncated(name):
    if name not in backend.available_backends():
        pytest.skip("extension not built")
    prm = CumulatedParams(a=1.0, tau=1.0, integration=IntegrationConfig(max_steps=5))
    with backend.use_backend(name), pytest.raises(RuntimeError, match="step_budget_exhausted"):
        solve(prm)


def test_unknown_backend():
    with pytest.raises(ValueError):
        backend.set_backend("fortran")


def test_use_backend_restores():
    before = backend.active_backend()
    with backend.use_backend("python"):
        assert backend.active_backend() == "python"
    assert backend.active_backend() == before


def test_fallback_when_extension_missing(monkeypatch):
    import ksselfsim

    monkeypatch.setitem(sys.modules, "ksselfsim._ckernels", None)
    monkeypatch.delattr(ksselfsim, "_ckernels", raising=False)
    try:
        importlib.reload(backend)
        assert backend.available_backends() == ["python"]
        assert backend.active_backend() == "python"
        prof = solve(CumulatedParams(a=1.0, tau=1.0))
        assert prof.grid[-1] == 120.0
    finally:
        monkeypatch.undo()
        importlib.reload(backend)
