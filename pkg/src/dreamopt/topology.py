"""Mixing matrices and consensus rounds.

Agent states are stored row-stacked: an ``m x d`` array whose ``i``-th row
belongs to agent ``i``.  Both mixing routines bill one communication round
per inner iteration to a caller-owned :class:`CommLedger`.
"""

from dataclasses import dataclass

import numpy as np
from scipy.sparse.csgraph import connected_components

from .errors import (
    ConstructionError,
    DegenerateTopologyError,
    DimensionError,
    InvalidParameterError,
)

TOL = 1e-12

# constants of the accelerated-mixing contraction bound c1 * (1 - c2 sqrt(delta))^K
C1 = np.sqrt(14.0)
C2 = 1.0 - 1.0 / np.sqrt(2.0)


@dataclass
class CommLedger:
    """Running count of synchronous exchanges."""

    rounds: int = 0
    scalars_moved: int = 0

    def bill(self, rounds, width):
        self.rounds += int(rounds)
        self.scalars_moved += int(rounds) * int(width)


@dataclass(frozen=True, eq=False)
class MixingMatrix:
    """Validated symmetric doubly stochastic PSD mixing matrix.

    Build through :meth:`from_array`, :func:`build_lazy_ring` or
    :func:`build_complete_averaging`; all of them run :func:`validate`.
    """

    w: np.ndarray
    m: int
    lambda2: float
    delta: float

    @classmethod
    def from_array(cls, w):
        w = np.array(w, dtype=float)
        if w.ndim != 2 or w.shape[0] != w.shape[1]:
            raise DimensionError(f"mixing matrix must be square, got shape {w.shape}")
        validate(w)
        w.setflags(write=False)
        lam2 = second_eigenvalue(w)
        return cls(w=w, m=w.shape[0], lambda2=lam2, delta=1.0 - lam2)

    @property
    def eigenvalues(self):
        return np.linalg.eigvalsh(self.w)[::-1]

    def contraction_bound(self, k):
        """Upper bound on the consensus-residual ratio after ``k`` accelerated rounds."""
        return C1 * (1.0 - C2 * np.sqrt(self.delta)) ** k


def validate(w):
    """Raise unless ``w`` is nonnegative, symmetric, doubly stochastic, PSD and connected."""
    m = w.shape[0]
    if np.any(w < -TOL):
        raise ConstructionError("mixing matrix has negative entries")
    if not np.allclose(w, w.T, rtol=0.0, atol=TOL):
        raise ConstructionError("mixing matrix is not symmetric")
    ones = np.ones(m)
    if np.max(np.abs(w @ ones - 1.0)) > TOL or np.max(np.abs(w.T @ ones - 1.0)) > TOL:
        raise ConstructionError("mixing matrix is not doubly stochastic")
    lam_min = float(np.linalg.eigvalsh(w)[0])
    if lam_min < -TOL:
        raise ConstructionError(
            f"mixing matrix is not positive semidefinite: smallest eigenvalue {lam_min:.6g}",
            eigenvalue=lam_min,
        )
    n_comp, _ = connected_components(np.abs(w) > TOL, directed=False)
    if n_comp != 1:
        raise ConstructionError(f"network graph has {n_comp} connected components")


def second_eigenvalue(w):
    w = np.asarray(w, dtype=float)
    if w.shape[0] == 1:
        return 0.0
    return float(np.linalg.eigvalsh(w)[-2])


def spectral_gap(w):
    """Return ``1 - lambda_2(W)``.

    Accepts a :class:`MixingMatrix` or a raw array; raw arrays are not
    validated, so disconnected inputs surface here as a
    :class:`DegenerateTopologyError`.
    """
    if isinstance(w, MixingMatrix):
        lam2 = w.lambda2
    else:
        lam2 = second_eigenvalue(w)
    if lam2 >= 1.0 - TOL:
        raise DegenerateTopologyError(f"lambda_2 = {lam2!r}: network does not mix")
    return 1.0 - lam2


def ring_walk(m):
    """Random-walk matrix of the ``m``-cycle (each node gives 1/2 to each neighbour)."""
    c = np.zeros((m, m))
    for i in range(m):
        c[i, (i + 1) % m] += 0.5
        c[i, (i - 1) % m] += 0.5
    return c


def build_lazy_ring(m, tau):
    """Lazy random walk ``tau * I + (1 - tau) * C`` on a ring of ``m`` nodes.

    Its eigenvalues are ``tau + (1 - tau) cos(2 pi k / m)``.
    """
    if int(m) != m or m < 2:
        raise InvalidParameterError(f"ring needs m >= 2 agents, got {m}")
    if not 0.0 < tau < 1.0:
        raise InvalidParameterError(f"laziness tau must lie in (0, 1), got {tau}")
    m = int(m)
    w = tau * np.eye(m) + (1.0 - tau) * ring_walk(m)
    w /= w.sum(axis=1, keepdims=True)
    return MixingMatrix.from_array(w)


def build_complete_averaging(m):
    if int(m) != m or m < 1:
        raise InvalidParameterError(f"need m >= 1 agents, got {m}")
    return MixingMatrix.from_array(np.full((int(m), int(m)), 1.0 / m))


def lazify(w):
    """Return the mixing matrix ``(W + I) / 2``.

    Use this explicitly for a symmetric doubly stochastic matrix that is not
    PSD; nothing in the package applies it silently.
    """
    w = w.w if isinstance(w, MixingMatrix) else np.asarray(w, dtype=float)
    return MixingMatrix.from_array(0.5 * (w + np.eye(w.shape[0])))


def _check_rows(a, w):
    a = np.asarray(a, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.shape[0] != w.m:
        raise DimensionError(f"state has {a.shape[0]} rows but the network has {w.m} agents")
    return a


def _is_consensual(a):
    return not (a != a[0]).any()


def fast_mix(a0, k, w, ledger=None):
    """Chebyshev-accelerated consensus.

    Runs ``a[k+1] = (1 + eta_a) W a[k] - eta_a a[k-1]`` with ``a[-1] = a[0]`` and
    ``eta_a = 1 / (1 + sqrt(1 - lambda_2^2))`` for ``k`` rounds.

    Parameters
    ----------
    a0 : ndarray, shape (m, d)
        Row-stacked agent states.
    k : int
        Number of communication rounds.
    w : MixingMatrix
    ledger : CommLedger, optional
        Billed ``k`` rounds of width ``d``.

    Returns
    -------
    ndarray, shape (m, d)
    """
    a = _check_rows(a0, w)
    k = int(k)
    if k < 0:
        raise InvalidParameterError(f"round count must be >= 0, got {k}")
    if ledger is not None:
        ledger.bill(k, a.shape[1])
    # consensus is a fixed point of the recursion; skip the arithmetic
    if k == 0 or _is_consensual(a):
        return a.copy()
    eta_a = 1.0 / (1.0 + np.sqrt(1.0 - w.lambda2 ** 2))
    prev, cur = a, a
    for _ in range(k):
        prev, cur = cur, (1.0 + eta_a) * (w.w @ cur) - eta_a * prev
    return cur


def plain_mix(a0, k, w, ledger=None):
    """Apply ``a <- W a`` ``k`` times."""
    a = _check_rows(a0, w)
    k = int(k)
    if k < 0:
        raise InvalidParameterError(f"round count must be >= 0, got {k}")
    if ledger is not None:
        ledger.bill(k, a.shape[1])
    if k == 0 or _is_consensual(a):
        return a.copy()
    for _ in range(k):
        a = w.w @ a
    return a


def consensus_residual(a):
    """Frobenius norm of ``a - 1 mean(a)``."""
    a = np.asarray(a, dtype=float)
    return float(np.linalg.norm(a - a.mean(axis=0, keepdims=True)))
