"""Pure-Python stepping for the two profile systems.

Same right-hand sides and the same stepper as the compiled module, driven
through :func:`ksselfsim.integrator.integrate`.
"""

import math

from .integrator import IntegrationConfig, OdeSystem, integrate

TWO_PI = 6.283185307179586


def cumulated_rhs(tau):
    q = 0.25 * tau

    def rhs(t, y):
        # y = (phi, log(exp(t/4) phi'), S)
        e = math.exp(y[1] - 0.25 * t)
        s = y[2]
        return (e, -s / (2.0 * t), e - q * s)

    return rhs


def radial_rhs(tau):
    q = 0.5 * tau

    def rhs(t, y):
        e = math.exp(y[0] - 0.25 * t * t)
        return (y[1], -(1.0 / t + q * t) * y[1] - e, TWO_PI * t * e)

    return rhs


_RHS = {0: cumulated_rhs, 1: radial_rhs}


def integrate_model(model, param, t0, state0, t_end, atol, rtol, h0, hmax, hmin, max_steps):
    """Return ``(nodes, states, termination, rejected)`` for one model solve."""
    config = IntegrationConfig(
        abs_tol=atol,
        rel_tol=rtol,
        initial_step=h0,
        max_step=hmax,
        min_step=hmin,
        max_steps=max_steps,
    )
    traj = integrate(OdeSystem(3, _RHS[model](param)), t0, state0, t_end, config)
    return traj.nodes, traj.states, traj.termination, traj.rejected_steps
