"""Lyapunov diagnostics of a swarm snapshot.

These read the state and evaluate exact gradients; they never touch the SFO
or communication ledgers.
"""

from dataclasses import astuple, dataclass, fields

import numpy as np

from .errors import ModeError
from .problem import primal_eval


@dataclass(frozen=True)
class RunRecord:
    """One diagnostics row.  ``None`` marks a quantity that is unavailable."""

    t: int
    sfo: int
    comm: int
    psi: float
    c: float
    v: float
    u: float
    grad_p_norm: float
    primal: float

    @classmethod
    def columns(cls):
        return tuple(f.name for f in fields(cls))

    def as_tuple(self):
        return astuple(self)


def _centered_sq(a):
    return float(np.sum((a - a.mean(axis=0)) ** 2))


def consensus_error(swarm, eta):
    """``|z - 1 z_bar|^2 + eta^2 |s - 1 s_bar|^2`` in Frobenius norm."""
    return _centered_sq(swarm.z) + eta ** 2 * _centered_sq(swarm.s)


def estimator_variances(swarm, problem):
    """Return ``(V, U)``: mean squared estimator error and squared mean error.

    ``(None, None)`` when the problem has no exact local-gradient oracle.
    """
    try:
        exact = problem.local_grads(swarm.z)
    except (NotImplementedError, ModeError):
        return None, None
    err = swarm.g - exact
    v = float(np.sum(err * err)) / problem.m
    mean = err.mean(axis=0)
    return v, float(mean @ mean)


def means(swarm, problem):
    zbar = swarm.z.mean(axis=0)
    return zbar[: problem.d_x], zbar[problem.d_x :]


def optimization_error(swarm, problem, alpha, tol=1e-8, p_star=None, primal=None):
    """``P(x_bar) - P* + alpha (P(x_bar) - f(x_bar, y_bar))``.

    ``p_star`` defaults to ``problem.p_star``; returns ``None`` if neither is set.
    ``primal`` may carry a precomputed ``P(x_bar)``.
    """
    p_star = problem.p_star if p_star is None else p_star
    if p_star is None:
        return None
    xbar, ybar = means(swarm, problem)
    if primal is None:
        primal = primal_eval(problem, xbar, tol, y0=problem.project_y(ybar))[0]
    f_bar = problem.value(np.concatenate([xbar, ybar]))
    return primal - p_star + alpha * (primal - f_bar)


def stationarity(swarm, problem, tol=1e-8):
    """Norm of the estimated ``grad P(x_bar)``."""
    xbar, ybar = means(swarm, problem)
    _, _, grad_p = primal_eval(problem, xbar, tol, y0=problem.project_y(ybar))
    return float(np.linalg.norm(grad_p))


def snapshot(swarm, problem, eta, alpha, sfo, comm, tol=1e-8, p_star=None, y0=None):
    """Compute a full :class:`RunRecord`; also returns the inner maximizer for warm starts."""
    xbar, ybar = means(swarm, problem)
    start = problem.project_y(ybar if y0 is None else y0)
    primal, y_star, grad_p = primal_eval(problem, xbar, tol, y0=start)
    psi = optimization_error(swarm, problem, alpha, tol, p_star, primal=primal)
    v, u = estimator_variances(swarm, problem)
    rec = RunRecord(
        t=swarm.t,
        sfo=int(sfo),
        comm=int(comm),
        psi=psi,
        c=consensus_error(swarm, eta),
        v=v,
        u=u,
        grad_p_norm=float(np.linalg.norm(grad_p)),
        primal=primal,
    )
    return rec, y_star

