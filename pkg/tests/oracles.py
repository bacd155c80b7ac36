"""Reference implementations written independently of the package.

Nothing here imports ``dreamopt``; tests compare the library against these.
"""

import math

import numpy as np


def logreg_sample_value(a, label, x, y_j, y, theta=1e-5, nu=10.0):
    """One summand ``y_j log(1 + e^{label a.x}) - |N y - 1|^2 / (2 N^2) + reg(x)``."""
    n_total = len(y)
    margin = label * float(np.dot(a, x))
    loss = math.log1p(math.exp(margin)) if margin < 30 else margin + math.log1p(math.exp(-margin))
    pen = sum((n_total * yk - 1.0) ** 2 for yk in y) / (2.0 * n_total ** 2)
    reg = theta * sum(nu * xk * xk / (1.0 + nu * xk * xk) for xk in x)
    return y_j * loss - pen + reg


def logreg_value(features, labels, idx, x, y):
    """Average of the per-sample objective over sample indices ``idx``."""
    return sum(logreg_sample_value(features[j], labels[j], x, y[j], y) for j in idx) / len(idx)


def quad_value(x, y, xi, h):
    """``<x + xi, y> - |y|^2/2 + <h, x - y>`` with scalar shift ``h``."""
    x, y, xi = map(np.asarray, (x, y, xi))
    return float(np.dot(x + xi, y) - 0.5 * np.dot(y, y) + h * (np.sum(x) - np.sum(y)))


def fd_grad(fun, z, h=1e-6):
    """Central finite differences."""
    z = np.asarray(z, dtype=float)
    g = np.zeros_like(z)
    for k in range(z.size):
        e = np.zeros_like(z)
        e[k] = h
        g[k] = (fun(z + e) - fun(z - e)) / (2 * h)
    return g


def simplex_by_bisection(v, iters=200):
    """Project onto the simplex by bisecting on the KKT multiplier ``theta``.

    The projection is ``max(v - theta, 0)`` with ``theta`` solving
    ``sum(max(v - theta, 0)) = 1``; the left side is monotone in ``theta``.
    """
    v = np.asarray(v, dtype=float)
    lo, hi = v.min() - 1.0, v.max()
    for _ in range(iters):
        mid = 0.5 * (lo + hi)
        if np.maximum(v - mid, 0.0).sum() > 1.0:
            lo = mid
        else:
            hi = mid
    return np.maximum(v - 0.5 * (lo + hi), 0.0)


def simplex_grid(n, steps):
    """All simplex points whose coordinates are multiples of ``1/steps``."""
    pts = []

    def rec(prefix, left):
        if len(prefix) == n - 1:
            pts.append(prefix + [left])
            return
        for k in range(left + 1):
            rec(prefix + [k], left - k)

    rec([], steps)
    return np.array(pts, dtype=float) / steps


def projected_gda(grad, project, x0, y0, eta, gamma, steps):
    """Single-machine two-timescale projected GDA on a gradient oracle ``grad(x, y)``.

    Returns the list of ``(x, y, g)`` states, where ``g`` is the gradient at ``(x, y)``.
    """
    x, y = np.array(x0, dtype=float), np.array(y0, dtype=float)
    g = grad(x, y)
    states = [(x, y, g)]
    d_x = len(x)
    for _ in range(steps):
        x = x - gamma * eta * g[:d_x]
        y = project(y + eta * g[d_x:])
        g = grad(x, y)
        states.append((x, y, g))
    return states
