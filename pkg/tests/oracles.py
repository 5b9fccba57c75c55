"""Independent fixed-step classical RK4 oracles.

Deliberately naive: original variables, first-order seeds, no step control,
no shared code with the package.
"""

import math


def rk4_cumulated(a, tau, eps=1e-6, y_end=30.0, h=1e-5):
    """Terminal ``(phi, phi', S)`` of the cumulated system at ``y_end``."""
    phi = a * eps - a * (1 + 2 * a) * eps * eps / 8
    p = a - a * (1 + 2 * a) * eps / 4
    S = a * eps
    y = eps
    n = int(round((y_end - eps) / h))
    h = (y_end - eps) / n
    q = tau / 4
    for i in range(n):
        y = eps + i * h
        k1f = p
        k1p = -p / 4 - p * S / (2 * y)
        k1s = p - q * S
        ym = y + h / 2
        p2 = p + h / 2 * k1p
        s2 = S + h / 2 * k1s
        k2f = p2
        k2p = -p2 / 4 - p2 * s2 / (2 * ym)
        k2s = p2 - q * s2
        p3 = p + h / 2 * k2p
        s3 = S + h / 2 * k2s
        k3f = p3
        k3p = -p3 / 4 - p3 * s3 / (2 * ym)
        k3s = p3 - q * s3
        ye = y + h
        p4 = p + h * k3p
        s4 = S + h * k3s
        k4f = p4
        k4p = -p4 / 4 - p4 * s4 / (2 * ye)
        k4s = p4 - q * s4
        phi += h / 6 * (k1f + 2 * k2f + 2 * k3f + k4f)
        p += h / 6 * (k1p + 2 * k2p + 2 * k3p + k4p)
        S += h / 6 * (k1s + 2 * k2s + 2 * k3s + k4s)
    return phi, p, S


def rk4_radial(s, tau, eps=1e-8, r_end=10.0, h=1e-5):
    """Terminal ``(w, w', M)`` of the radial shooting system at ``r_end``."""
    es = math.exp(s)
    w = s - eps * eps * es / 4
    dw = -eps * es / 2
    M = math.pi * eps * eps * es
    n = int(round((r_end - eps) / h))
    h = (r_end - eps) / n
    c = tau / 2
    tp = 2 * math.pi
    for i in range(n):
        r = eps + i * h
        e1 = math.exp(w - r * r / 4)
        k1w = dw
        k1d = -(1 / r + c * r) * dw - e1
        k1m = tp * r * e1
        rm = r + h / 2
        w2 = w + h / 2 * k1w
        d2 = dw + h / 2 * k1d
        e2 = math.exp(w2 - rm * rm / 4)
        k2w = d2
        k2d = -(1 / rm + c * rm) * d2 - e2
        k2m = tp * rm * e2
        w3 = w + h / 2 * k2w
        d3 = dw + h / 2 * k2d
        e3 = math.exp(w3 - rm * rm / 4)
        k3w = d3
        k3d = -(1 / rm + c * rm) * d3 - e3
        k3m = tp * rm * e3
        re = r + h
        w4 = w + h * k3w
        d4 = dw + h * k3d
        e4 = math.exp(w4 - re * re / 4)
        k4w = d4
        k4d = -(1 / re + c * re) * d4 - e4
        k4m = tp * re * e4
        w += h / 6 * (k1w + 2 * k2w + 2 * k3w + k4w)
        dw += h / 6 * (k1d + 2 * k2d + 2 * k3d + k4d)
        M += h / 6 * (k1m + 2 * k2m + 2 * k3m + k4m)
    return w, dw, M
