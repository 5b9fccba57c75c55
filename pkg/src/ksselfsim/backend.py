"""Selection between the compiled stepping kernels and the Python fallback.

The compiled extension is used whenever it imports; otherwise everything
runs on the pure-Python implementation with identical numerics.
"""

from __future__ import annotations

import contextlib
import logging

from . import _pykernels
from .integrator import IntegrationConfig, IntegrationError, STEP_UNDERFLOW

log = logging.getLogger(__name__)

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None
    log.debug("compiled kernels unavailable, using pure-Python fallback")

CUMULATED = 0
RADIAL = 1

_BACKENDS = {"python": _pykernels}
if _ckernels is not None:
    _BACKENDS["compiled"] = _ckernels

_active = "compiled" if _ckernels is not None else "python"


def available_backends() -> list[str]:
    return sorted(_BACKENDS)


def active_backend() -> str:
    return _active


def set_backend(name: str) -> None:
    global _active
    if name not in _BACKENDS:
        raise ValueError(f"backend {name!r} not available; have {available_backends()}")
    _active = name


@contextlib.contextmanager
def use_backend(name: str):
    previous = _active
    set_backend(name)
    try:
        yield
    finally:
        set_backend(previous)


def run(model: int, param: float, t0: float, state0, t_end: float,
        config: IntegrationConfig, backend: str | None = None):
    """Integrate one of the profile systems; raise on early termination."""
    h0, hmax, hmin = config.resolved(t_end - t0)
    kernel = _BACKENDS[backend or _active]
    nodes, states, termination, _ = kernel.integrate_model(
        model, float(param), float(t0), [float(v) for v in state0], float(t_end),
        config.abs_tol, config.rel_tol, h0, hmax, hmin, int(config.max_steps),
    )
    if termination != "reached_end":
        hint = " (singularity or stiffness)" if termination == STEP_UNDERFLOW else ""
        raise IntegrationError(
            f"integration stopped at t={nodes[-1]:.6g} before {t_end:.6g}: {termination}{hint}"
        )
    return nodes, states
