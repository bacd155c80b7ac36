"""Decentralized minimax problems ``min_x max_{y in Y} (1/m) sum_i f_i(x, y)``.

A problem bundles the per-agent stochastic oracle, the exact local gradients
used by diagnostics, and the projection onto ``Y``.  Points are flat vectors
``z = [x; y]`` of length ``d_x + d_y``.
"""

from dataclasses import dataclass

import numpy as np
from scipy.special import expit

from .constraints import AllSpace, Simplex, make_constraint
from .errors import ConvergenceError, InvalidParameterError, ModeError

MAX_ASCENT_ITERS = 100_000


@dataclass
class SfoLedger:
    """Count of single-sample stochastic gradient evaluations."""

    calls: int = 0

    def bill(self, count):
        self.calls += int(count)


class MinimaxProblem:
    """Base class.

    Subclasses implement ``_batch_grad``, ``draw``, ``full_batch`` and
    ``exact_local_grad``/``exact_local_value``.  ``n`` is ``None`` for an
    online problem (fresh i.i.d. draws, no finite sum).
    """

    d_x: int
    d_y: int
    m: int
    n = None
    L: float
    mu: float
    sigma = None
    constraint = AllSpace()
    # optimal primal value when it is known in closed form
    p_star = None
    # any valid lower bound on P*, used to bound the initial optimization error
    primal_lower_bound = None

    def _check_constants(self):
        if not (self.L > 0 and self.mu > 0):
            raise InvalidParameterError(f"need L, mu > 0, got L={self.L}, mu={self.mu}")
        if self.L < self.mu:
            raise InvalidParameterError(f"need L >= mu, got L={self.L} < mu={self.mu}")

    @property
    def d(self):
        return self.d_x + self.d_y

    @property
    def kappa(self):
        return self.L / self.mu

    @property
    def online(self):
        return self.n is None

    def split(self, z):
        z = np.asarray(z)
        return z[..., : self.d_x], z[..., self.d_x :]

    # oracle interface -----------------------------------------------------

    def draw(self, agent, size, rng):
        """Return a batch of ``size`` i.i.d. sample descriptors for ``agent``."""
        raise NotImplementedError

    def full_batch(self, agent):
        raise NotImplementedError

    def _batch_grad(self, agent, z, batch):
        raise NotImplementedError

    def exact_local_grad(self, agent, z):
        raise NotImplementedError

    def exact_local_value(self, agent, z):
        raise NotImplementedError

    # public operations ----------------------------------------------------

    def stochastic_grad(self, agent, z, batch, ledger=None):
        """Average of single-sample gradients over ``batch``; bills ``len(batch)``."""
        if len(batch) == 0:
            raise InvalidParameterError("empty batch")
        g = self._batch_grad(agent, np.asarray(z, dtype=float), batch)
        if ledger is not None:
            ledger.bill(len(batch))
        return g

    def full_local_grad(self, agent, z, ledger=None):
        """Exact local gradient of a finite-sum problem; bills ``n`` only if given a ledger."""
        if self.online:
            raise ModeError("full local gradient requires a finite-sum (offline) problem")
        g = self.exact_local_grad(agent, np.asarray(z, dtype=float))
        if ledger is not None:
            ledger.bill(self.n)
        return g

    def full_local_grads(self, zs, ledger=None):
        """:meth:`full_local_grad` for every agent at its own row of ``zs``."""
        if self.online:
            raise ModeError("full local gradient requires a finite-sum (offline) problem")
        g = self.local_grads(np.asarray(zs, dtype=float))
        if ledger is not None:
            ledger.bill(self.m * self.n)
        return g

    def local_grads(self, zs):
        """Exact gradients of every agent at its own row of ``zs``; never billed."""
        return np.stack([self.exact_local_grad(i, zs[i]) for i in range(self.m)])

    def grad(self, z):
        """Exact gradient of the network average ``f`` at a single point."""
        z = np.asarray(z, dtype=float)
        return np.mean([self.exact_local_grad(i, z) for i in range(self.m)], axis=0)

    def value(self, z):
        z = np.asarray(z, dtype=float)
        return float(np.mean([self.exact_local_value(i, z) for i in range(self.m)]))

    def project_y(self, y):
        return self.constraint.project(y)

    def describe(self):
        return {
            "kind": type(self).__name__,
            "d_x": self.d_x,
            "d_y": self.d_y,
            "m": self.m,
            "n": self.n,
            "L": self.L,
            "mu": self.mu,
            "sigma": self.sigma,
            "constraint": self.constraint.describe(),
        }


class QuadraticProblem(MinimaxProblem):
    """Bilinear-quadratic fixture ``F_i(x, y; xi) = <x + xi, y> - |y|^2/2 + <h_i, x - y>``.

    The shifts ``h_i`` sum to zero, so the network objective is
    ``f(x, y) = <x, y> - |y|^2/2`` with ``P(x) = |x|^2/2`` when ``Y`` is the
    whole space.  Noise ``xi`` enters the y-gradient only; it is Rademacher
    ``+-sigma`` per coordinate online, and a zero-mean list of ``+-sigma``
    pairs offline.
    """

    def __init__(self, m, dim=1, n=None, sigma=0.0, shift=0.0, constraint=None, L=1.0, mu=1.0):
        self.m = int(m)
        self.d_x = self.d_y = int(dim)
        self.n = None if n is None else int(n)
        self.sigma = float(sigma)
        self.L, self.mu = float(L), float(mu)
        self._check_constants()
        self.constraint = make_constraint(constraint) if constraint is not None else AllSpace()
        if not isinstance(self.constraint, Simplex):
            # P(x) >= f(x, 0) = 0 = P(0) whenever 0 is feasible
            self.p_star = self.primal_lower_bound = 0.0
        self.shift = float(shift)
        self.shifts = shift * (np.arange(self.m) - (self.m - 1) / 2.0)
        if self.n is not None:
            signs = np.zeros(self.n)
            half = self.n // 2
            signs[:half] = 1.0
            signs[half : 2 * half] = -1.0
            self._noise = self.sigma * np.repeat(signs[:, None], self.d_y, axis=1)

    def draw(self, agent, size, rng):
        if self.online:
            return self.sigma * rng.choice((-1.0, 1.0), size=(size, self.d_y))
        return rng.integers(0, self.n, size=size)

    def full_batch(self, agent):
        if self.online:
            raise ModeError("online problem has no full batch")
        return np.arange(self.n)

    def _xi_mean(self, batch):
        batch = np.asarray(batch)
        if self.online:
            return batch.mean(axis=0)
        return self._noise[batch].mean(axis=0)

    def _batch_grad(self, agent, z, batch):
        x, y = self.split(z)
        h = self.shifts[agent]
        return np.concatenate([y + h, x + self._xi_mean(batch) - y - h])

    def exact_local_grad(self, agent, z):
        x, y = self.split(z)
        h = self.shifts[agent]
        return np.concatenate([y + h, x - y - h])

    def local_grads(self, zs):
        x, y = zs[:, : self.d_x], zs[:, self.d_x :]
        h = self.shifts[:, None]
        out = np.empty_like(zs)
        out[:, : self.d_x] = y + h
        out[:, self.d_x :] = x - y - h
        return out

    def exact_local_value(self, agent, z):
        x, y = self.split(z)
        h = self.shifts[agent]
        return float(x @ y - 0.5 * y @ y + h * (x.sum() - y.sum()))

    def describe(self):
        out = super().describe()
        out["shift"] = self.shift
        return out


class RobustLogRegProblem(MinimaxProblem):
    """Distributionally robust logistic regression over the sample simplex.

    Sample ``j`` contributes ``F_j(x, y) = y_j l_j(x) - V(y) + g(x)`` with
    ``l_j(x) = log(1 + exp(b_j a_j^T x))``, ``V(y) = |N y - 1|^2 / (2 N^2)``
    and ``g(x) = theta sum_k nu x_k^2 / (1 + nu x_k^2)``.  ``y`` is one global
    ``N``-vector in the simplex; agent ``i`` touches only the coordinates of
    its own samples.

    Parameters
    ----------
    data : RobustLogRegData
        Must already be partitioned.
    L : float, optional
        Smoothness constant; defaults to :func:`estimate_smoothness`.
    mu : float
        Strong concavity in ``y``.  ``V`` equals ``|y - 1/N|^2 / 2`` so the
        exact modulus is 1.
    online : bool
        Treat each agent's samples as a distribution sampled with
        replacement instead of a finite sum.
    """

    constraint = Simplex()
    primal_lower_bound = 0.0

    def __init__(self, data, L=None, mu=1.0, online=False, sigma=None):
        if data.partition is None:
            raise InvalidParameterError("data must be partitioned across agents first")
        self.data = data
        self.A = data.features
        self.b = data.labels
        self.parts = data.partition
        self.m, n = self.parts.shape
        self.n = None if online else int(n)
        self._local_n = int(n)
        self.N = data.n_samples
        self.d_x, self.d_y = data.n_features, self.N
        self.theta, self.nu = data.theta, data.nu
        self.L = float(L) if L is not None else estimate_smoothness(data)
        self.mu = float(mu)
        self.sigma = sigma
        self._check_constants()

    def reg_value(self, x):
        t = self.nu * x * x
        return self.theta * float(np.sum(t / (1.0 + t)))

    def reg_grad(self, x):
        return self.theta * 2.0 * self.nu * x / (1.0 + self.nu * x * x) ** 2

    def losses(self, x, idx=slice(None)):
        return np.logaddexp(0.0, self.b[idx] * (self.A[idx] @ x))

    def draw(self, agent, size, rng):
        return self.parts[agent][rng.integers(0, self._local_n, size=size)]

    def full_batch(self, agent):
        if self.online:
            raise ModeError("online problem has no full batch")
        return self.parts[agent]

    def _batch_grad(self, agent, z, batch):
        x, y = self.split(z)
        batch = np.asarray(batch)
        a, lab = self.A[batch], self.b[batch]
        margin = lab * (a @ x)
        k = len(batch)
        gx = (y[batch] * expit(margin) * lab) @ a / k + self.reg_grad(x)
        gy = -(y - 1.0 / self.N)
        np.add.at(gy, batch, np.logaddexp(0.0, margin) / k)
        return np.concatenate([gx, gy])

    def exact_local_grad(self, agent, z):
        return self._batch_grad(agent, z, self.parts[agent])

    def exact_local_value(self, agent, z):
        x, y = self.split(z)
        idx = self.parts[agent]
        r = y - 1.0 / self.N
        return float(np.mean(y[idx] * self.losses(x, idx)) - 0.5 * r @ r + self.reg_value(x))

    def value(self, z):
        x, y = self.split(np.asarray(z, dtype=float))
        r = y - 1.0 / self.N
        return float(np.mean(y * self.losses(x)) - 0.5 * r @ r + self.reg_value(x))

    def grad(self, z):
        return self._batch_grad(None, np.asarray(z, dtype=float), np.arange(self.N))

    def describe(self):
        out = super().describe()
        out.update(theta=self.theta, nu=self.nu, N=self.N)
        return out


def estimate_smoothness(data):
    """Bound on the per-sample gradient Lipschitz constant of robust logistic regression.

    Sums the operator-norm bounds of the Hessian blocks for ``y`` in the
    simplex: ``|a|^2/4 + 2 theta nu`` (x-x), ``|a|`` (x-y) and ``1`` (y-y).
    """
    r = float(np.max(np.linalg.norm(data.features, axis=1)))
    return 1.0 + 0.25 * r * r + r + 2.0 * data.theta * data.nu


def project_y(problem, y):
    return problem.project_y(y)


def reduced_gradient(problem, z, eta):
    """``(Pi(y + eta grad_y f) - y) / eta`` with the exact network gradient."""
    if not 0.0 < eta <= 1.0 / problem.L * (1.0 + 1e-12):
        raise InvalidParameterError(f"eta must lie in (0, 1/L], got {eta}")
    z = np.asarray(z, dtype=float)
    _, y = problem.split(z)
    gy = problem.grad(z)[problem.d_x :]
    return (problem.project_y(y + eta * gy) - y) / eta


def primal_eval(problem, x, tol=1e-8, y0=None, max_iter=MAX_ASCENT_ITERS):
    """Estimate ``P(x) = max_y f(x, y)`` by projected gradient ascent.

    Ascent uses step ``1/L`` and stops once the reduced gradient norm is at
    most ``tol * mu / 2``, which guarantees ``|y - y*(x)| <= tol``.

    Returns
    -------
    primal : float
        ``f(x, y)`` at the final ``y``.
    y : ndarray
        Approximate maximizer.
    grad_p : ndarray
        ``grad_x f(x, y)``, the estimate of ``grad P(x)``.
    """
    if not tol > 0:
        raise InvalidParameterError(f"tol must be positive, got {tol}")
    x = np.asarray(x, dtype=float)
    eta = 1.0 / problem.L
    y = problem.project_y(np.zeros(problem.d_y) if y0 is None else np.asarray(y0, dtype=float))
    target = tol * problem.mu / 2.0
    residual = np.inf
    for _ in range(max_iter):
        g = problem.grad(np.concatenate([x, y]))
        y_next = problem.project_y(y + eta * g[problem.d_x :])
        residual = float(np.linalg.norm(y_next - y)) / eta
        if residual <= target:
            z = np.concatenate([x, y])
            return problem.value(z), y, g[: problem.d_x]
        y = y_next
    raise ConvergenceError(f"primal ascent did not converge in {max_iter} iterations", residual)
