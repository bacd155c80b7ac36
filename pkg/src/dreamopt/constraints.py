"""Closed convex feasible sets for the maximization variable.

``project`` accepts a single point or a row-stacked ``(m, d_y)`` array and
projects every row.
"""

import numpy as np

from .errors import InvalidParameterError


class AllSpace:
    name = "all-space"

    def project(self, y):
        return np.array(y, dtype=float)

    def contains(self, y, tol=0.0):
        return bool(np.all(np.isfinite(y)))

    def describe(self):
        return {"kind": self.name}


class Box:
    """The cube ``[-c, c]^d``."""

    name = "box"

    def __init__(self, c):
        if not c > 0:
            raise InvalidParameterError(f"box half-width must be positive, got {c}")
        self.c = float(c)

    def project(self, y):
        return np.clip(np.asarray(y, dtype=float), -self.c, self.c)

    def contains(self, y, tol=0.0):
        return bool(np.all(np.abs(y) <= self.c + tol))

    def describe(self):
        return {"kind": self.name, "c": self.c}


class Simplex:
    """Probability simplex ``{y >= 0, sum(y) = 1}``."""

    name = "simplex"
    # points this close to feasible are returned untouched, so projection is idempotent
    feasibility_tol = 1e-12

    def project(self, y):
        y = np.asarray(y, dtype=float)
        if y.ndim == 1:
            return project_simplex(y[None, :], self.feasibility_tol)[0]
        return project_simplex(y, self.feasibility_tol)

    def contains(self, y, tol=1e-10):
        y = np.asarray(y)
        return bool(np.all(y >= -tol) and np.all(np.abs(y.sum(axis=-1) - 1.0) <= tol * y.shape[-1]))

    def describe(self):
        return {"kind": self.name}


def project_simplex(v, feasibility_tol=0.0):
    """Row-wise Euclidean projection onto the probability simplex.

    Sort-based: with ``u`` the row sorted in decreasing order, the threshold is
    ``(sum(u[:r]) - 1) / r`` for the largest ``r`` with
    ``u[r-1] > (sum(u[:r]) - 1) / r``.  Ties in ``u`` give the same threshold
    whichever way they are ordered.
    """
    v = np.asarray(v, dtype=float)
    n = v.shape[1]
    u = -np.sort(-v, axis=1)
    css = np.cumsum(u, axis=1) - 1.0
    ind = np.arange(1, n + 1)
    cond = u - css / ind > 0
    rho = n - 1 - np.argmax(cond[:, ::-1], axis=1)
    theta = css[np.arange(v.shape[0]), rho] / (rho + 1)
    out = np.maximum(v - theta[:, None], 0.0)
    if feasibility_tol > 0:
        feasible = np.all(v >= 0, axis=1) & (np.abs(v.sum(axis=1) - 1.0) <= feasibility_tol)
        out[feasible] = v[feasible]
    return out


def make_constraint(spec):
    """Build a constraint from ``"all-space"``, ``"simplex"`` or ``"box:<c>"``."""
    if not isinstance(spec, str):
        return spec
    if spec in ("all-space", "none", "R"):
        return AllSpace()
    if spec == "simplex":
        return Simplex()
    if spec.startswith("box"):
        _, _, c = spec.partition(":")
        return Box(float(c or 1.0))
    raise InvalidParameterError(f"unknown constraint {spec!r}")
