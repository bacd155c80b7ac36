"""DREAM: decentralized recursive-gradient descent ascent, plus a gradient-tracking GDA baseline.

Every agent keeps three rows: its iterate ``z(i) = [x(i); y(i)]``, a tracker
``s(i)`` of the network-average gradient and a variance-reduced local
estimator ``g(i)``.  One iteration takes an ``x`` descent step of size
``gamma * eta`` and a projected ``y`` ascent step of size ``eta`` along the
tracker, mixes both with FastMix, refreshes the estimators (large batch with
probability ``p``, otherwise a recursive small-batch correction on each agent
that is active with probability ``q``) and mixes the tracker.
"""

import dataclasses
import math
import warnings
from dataclasses import dataclass

import numpy as np

from . import metrics
from .errors import DivergenceError, InvalidParameterError, ModeError
from .problem import SfoLedger
from .topology import C1, C2, CommLedger, fast_mix, plain_mix

ALPHA = 1.0 / 8.0
COMM_MODES = ("separate", "concatenated")


def _ceil(x):
    # tolerate rounding noise in quantities that are integers in exact arithmetic
    return math.ceil(x - 1e-12 * max(1.0, abs(x)))


@dataclass(frozen=True)
class DreamConfig:
    eta: float
    gamma: float
    alpha: float
    p: float
    q: float
    b: int
    b_prime: int
    K0: int
    K: int
    K_prime: int
    T: int
    mode: str = "offline"
    seed: int = 0

    def __post_init__(self):
        if self.mode not in ("online", "offline"):
            raise InvalidParameterError(f"mode must be 'online' or 'offline', got {self.mode!r}")
        if not self.eta > 0:
            raise InvalidParameterError(f"eta must be positive, got {self.eta}")
        for name in ("gamma", "alpha", "p", "q"):
            value = getattr(self, name)
            if not 0.0 < value <= 1.0:
                raise InvalidParameterError(f"{name} must lie in (0, 1], got {value}")
        for name in ("b", "b_prime", "K0", "K", "K_prime", "T"):
            value = getattr(self, name)
            if int(value) != value or value < 1:
                raise InvalidParameterError(f"{name} must be a positive integer, got {value}")
            object.__setattr__(self, name, int(value))

    def replace(self, **changes):
        return dataclasses.replace(self, **changes)

    def as_dict(self):
        return dataclasses.asdict(self)


def derive_config(L, kappa, epsilon, m, n=None, sigma=None, delta=1.0, psi0=None, T=None,
                  seed=0, **overrides):
    """Parameter schedule with convergence guarantees.

    Parameters
    ----------
    L, kappa : float
        Smoothness and condition number ``L / mu``.
    epsilon : float
        Target stationarity ``|grad P(x_out)| <= epsilon``.
    m : int
        Number of agents.
    n : int or None
        Local sample count (offline); ``None`` selects the online schedule,
        which needs ``sigma`` unless ``b_prime`` is overridden.
    delta : float
        Spectral gap of the mixing matrix.
    psi0 : float, optional
        Initial optimization error; required unless ``T`` is given.
    **overrides
        Any :class:`DreamConfig` field, applied after derivation.

    Returns
    -------
    DreamConfig
    """
    if not (L > 0 and epsilon > 0 and m >= 1):
        raise InvalidParameterError("L, epsilon and m must be positive")
    if not kappa >= 1:
        raise InvalidParameterError(f"kappa must be >= 1, got {kappa}")
    if not 0 < delta <= 1:
        raise InvalidParameterError(f"spectral gap must lie in (0, 1], got {delta}")
    eta = 1.0 / (48.0 * L)
    alpha = ALPHA
    gamma = alpha / ((1.0 + alpha) * 128.0 * kappa ** 2)
    if n is None:
        mode = "online"
        if "b_prime" in overrides:
            b_prime = int(overrides["b_prime"])
        elif sigma is None:
            raise InvalidParameterError("online schedule needs the variance bound sigma")
        else:
            b_prime = max(1, _ceil(32.0 * sigma ** 2 / (gamma * m * epsilon ** 2)))
    else:
        mode = "offline"
        b_prime = int(n)
    root = math.sqrt(b_prime / m)
    b = max(1, _ceil(root))
    q = root / b
    if q > 1.0:
        raise InvalidParameterError(f"derived activation probability q = {q} exceeds 1")
    p = b * q / (b * q + b_prime)
    if T is None:
        if psi0 is None:
            raise InvalidParameterError("need psi0 (initial optimization error) or an explicit T")
        T = _ceil(16.0 * psi0 / (gamma * eta * epsilon ** 2) + 2.0 / p)
    rate = C2 * math.sqrt(delta)
    K0 = max(1, _ceil(math.log(16.0 * C1 / (gamma * m * epsilon ** 2)) / rate))
    K = max(1, _ceil(5.0 * math.log(C1 * (m / b_prime + 1.0)) / rate))
    K_prime = max(1, _ceil(5.0 * math.log(C1 * m) / rate))
    fields = dict(eta=eta, gamma=gamma, alpha=alpha, p=p, q=q, b=b, b_prime=b_prime,
                  K0=K0, K=K, K_prime=K_prime, T=max(1, int(T)), mode=mode, seed=seed)
    unknown = set(overrides) - set(fields)
    if unknown:
        raise InvalidParameterError(f"unknown config fields {sorted(unknown)}")
    fields.update(overrides)
    if fields["p"] > 1.0:
        warnings.warn(f"switch probability p = {fields['p']} clamped to 1", stacklevel=2)
        fields["p"] = 1.0
    return DreamConfig(**fields)


@dataclass
class AgentSwarm:
    """Row-stacked per-agent state after ``t`` completed iterations."""

    z: np.ndarray
    s: np.ndarray
    g: np.ndarray
    t: int = 0
    # whether the iteration that produced this state used the large batch
    refreshed: bool = True


class Streams:
    """Independent random streams: the shared coin, the output sampler, one per agent.

    Each agent draws its activation coins and mini-batches only from its own
    stream, so the run does not depend on the order agents are processed in.
    """

    def __init__(self, seed, m):
        children = np.random.SeedSequence(int(seed)).spawn(m + 2)
        self.coin = np.random.default_rng(children[0])
        self.output = np.random.default_rng(children[1])
        self.agents = [np.random.default_rng(c) for c in children[2:]]


def _check_start(problem, z0):
    z0 = np.asarray(z0, dtype=float)
    if z0.shape != (problem.d,):
        raise InvalidParameterError(f"initial point must have length {problem.d}, got {z0.shape}")
    if not np.all(np.isfinite(z0)):
        raise InvalidParameterError("initial point is not finite")
    _, y0 = problem.split(z0)
    if not problem.constraint.contains(y0, 1e-10):
        raise InvalidParameterError("initial y is not feasible")
    return z0


def _check_mode(problem, config):
    if config.mode == "offline":
        if problem.online:
            raise ModeError("offline mode needs a finite-sum problem")
        if config.b_prime != problem.n:
            raise InvalidParameterError(
                f"offline mode uses the full local set: b_prime must equal n = {problem.n}"
            )
    if config.eta > 1.0 / (4.0 * problem.L) * (1 + 1e-12):
        warnings.warn(f"eta = {config.eta} exceeds 1/(4L) = {1 / (4 * problem.L)}", stacklevel=3)


def _large_batch_grad(problem, config, agent, z, rng, sfo):
    if config.mode == "offline":
        return problem.full_local_grad(agent, z, sfo)
    return problem.stochastic_grad(agent, z, problem.draw(agent, config.b_prime, rng), sfo)


def _bill_mixing(comm, mode, k_primal, k_tracker, d_x, d_y):
    if comm is None:
        return
    d = d_x + d_y
    if mode == "separate":
        comm.bill(k_primal, d_x)
        comm.bill(k_primal, d_y)
        comm.bill(k_tracker, d)
    elif mode == "concatenated":
        comm.rounds += max(k_primal, k_tracker)
        comm.scalars_moved += k_primal * d + k_tracker * d
    else:
        raise InvalidParameterError(f"comm_mode must be one of {COMM_MODES}, got {mode!r}")


def _check_finite(swarm, history=None):
    # one reduction: any nan/inf entry makes the total non-finite
    if not np.isfinite(swarm.z.sum() + swarm.s.sum() + swarm.g.sum()):
        raise DivergenceError(swarm.t, history)


def dream_init(problem, config, z0, w, streams=None, sfo=None, comm=None):
    """Start every agent at ``z0`` with a large-batch estimator and mixed tracker."""
    _check_mode(problem, config)
    z0 = _check_start(problem, z0)
    if w.m != problem.m:
        raise InvalidParameterError(f"mixing matrix has {w.m} agents, problem has {problem.m}")
    streams = streams or Streams(config.seed, problem.m)
    z = np.tile(z0, (problem.m, 1))
    g = np.stack([
        _large_batch_grad(problem, config, i, z0, streams.agents[i], sfo) for i in range(problem.m)
    ])
    s = fast_mix(g, config.K0, w, comm)
    swarm = AgentSwarm(z=z, s=s, g=g, t=0, refreshed=True)
    _check_finite(swarm)
    return swarm


def dream_step(swarm, problem, config, w, streams, sfo=None, comm=None,
               strict_feasible=False, comm_mode="separate"):
    """One DREAM iteration; returns the new :class:`AgentSwarm`."""
    d_x = problem.d_x
    m = problem.m
    coin = config.p >= 1.0 or streams.coin.random() < config.p
    x, y = swarm.z[:, :d_x], swarm.z[:, d_x:]
    u, v = swarm.s[:, :d_x], swarm.s[:, d_x:]
    z_new = np.empty_like(swarm.z)
    z_new[:, :d_x] = fast_mix(x - config.gamma * config.eta * u, config.K, w)
    y_new = fast_mix(problem.project_y(y + config.eta * v), config.K, w)
    z_new[:, d_x:] = problem.project_y(y_new) if strict_feasible else y_new

    if coin and config.mode == "offline":
        g_new = problem.full_local_grads(z_new, sfo)
    else:
        g_new = swarm.g.copy()
    for i in range(m):
        rng = streams.agents[i]
        if coin:
            if config.mode == "online":
                g_new[i] = _large_batch_grad(problem, config, i, z_new[i], rng, sfo)
        elif rng.random() < config.q:
            batch = problem.draw(i, config.b, rng)
            diff = (problem.stochastic_grad(i, z_new[i], batch, sfo)
                    - problem.stochastic_grad(i, swarm.z[i], batch, sfo))
            # (1 / (b q)) * sum over the batch == (1 / q) * batch mean
            g_new[i] = swarm.g[i] + diff / config.q

    k_tracker = config.K_prime if coin else config.K
    s_new = fast_mix(swarm.s + g_new - swarm.g, k_tracker, w)
    _bill_mixing(comm, comm_mode, config.K, k_tracker, d_x, problem.d_y)
    new = AgentSwarm(z=z_new, s=s_new, g=g_new, t=swarm.t + 1, refreshed=bool(coin))
    _check_finite(new)
    return new


class _Reservoir:
    """Uniform draw from a stream of row blocks of unknown total length."""

    def __init__(self, rng):
        self.rng = rng
        self.seen = 0
        self.item = None

    def offer(self, rows):
        k = rows.shape[0]
        self.seen += k
        if self.rng.random() * self.seen < k:
            self.item = rows[self.rng.integers(k)].copy()


def _run(problem, swarm, step, w, eta, alpha, T, streams, sfo, comm, diag_every, diag_tol,
         p_star, max_sfo, max_comm, callback):
    history = []
    reservoir = _Reservoir(streams.output)
    y_warm = None

    def record():
        nonlocal y_warm
        rec, y_warm = metrics.snapshot(swarm, problem, eta, alpha, sfo.calls, comm.rounds,
                                       tol=diag_tol, p_star=p_star, y0=y_warm)
        history.append(rec)
        if callback is not None:
            callback(swarm, rec)

    record()
    for _ in range(T):
        if max_sfo is not None and sfo.calls >= max_sfo:
            break
        if max_comm is not None and comm.rounds >= max_comm:
            break
        reservoir.offer(swarm.z[:, : problem.d_x])
        try:
            swarm = step(swarm)
        except DivergenceError as err:
            raise DivergenceError(err.iteration, history, where="state") from None
        if diag_every and swarm.t % diag_every == 0:
            record()
    if not history or history[-1].t != swarm.t:
        record()
    return reservoir.item, history, swarm


def dream_run(problem, config, z0, w, *, sfo=None, comm=None, diag_every=1, diag_tol=1e-8,
              p_star=None, max_sfo=None, max_comm=None, strict_feasible=False,
              comm_mode="separate", callback=None, return_swarm=False):
    """Run DREAM for ``config.T`` iterations (or until a budget is spent).

    Returns
    -------
    x_out : ndarray
        Drawn uniformly from all agents' x-iterates over the executed
        iterations ``0 .. T-1``.
    history : list of RunRecord
        Diagnostics at ``t = 0``, every ``diag_every`` iterations and at the
        final iteration.  ``diag_every=0`` records only the endpoints.
    """
    sfo = sfo if sfo is not None else SfoLedger()
    comm = comm if comm is not None else CommLedger()
    streams = Streams(config.seed, problem.m)
    swarm = dream_init(problem, config, z0, w, streams, sfo, comm)
    if comm_mode not in COMM_MODES:
        raise InvalidParameterError(f"comm_mode must be one of {COMM_MODES}, got {comm_mode!r}")

    def step(sw):
        return dream_step(sw, problem, config, w, streams, sfo, comm, strict_feasible, comm_mode)

    x_out, history, swarm = _run(problem, swarm, step, w, config.eta, config.alpha, config.T,
                                 streams, sfo, comm, diag_every, diag_tol, p_star, max_sfo,
                                 max_comm, callback)
    if return_swarm:
        return x_out, history, swarm
    return x_out, history


@dataclass(frozen=True)
class GdaConfig:
    """Step sizes and horizon for the gradient-tracking GDA baseline."""

    eta: float
    gamma: float
    T: int
    seed: int = 0
    alpha: float = ALPHA


def gt_gda_step(swarm, problem, config, w, sfo=None, comm=None, strict_feasible=False,
                comm_mode="separate"):
    d_x = problem.d_x
    x, y = swarm.z[:, :d_x], swarm.z[:, d_x:]
    u, v = swarm.s[:, :d_x], swarm.s[:, d_x:]
    z_new = np.empty_like(swarm.z)
    z_new[:, :d_x] = plain_mix(x - config.gamma * config.eta * u, 1, w)
    y_new = plain_mix(problem.project_y(y + config.eta * v), 1, w)
    z_new[:, d_x:] = problem.project_y(y_new) if strict_feasible else y_new
    g_new = problem.full_local_grads(z_new, sfo)
    s_new = plain_mix(swarm.s + g_new - swarm.g, 1, w)
    _bill_mixing(comm, comm_mode, 1, 1, d_x, problem.d_y)
    new = AgentSwarm(z=z_new, s=s_new, g=g_new, t=swarm.t + 1, refreshed=True)
    _check_finite(new)
    return new


def gt_gda_run(problem, config, z0, w, *, sfo=None, comm=None, diag_every=1, diag_tol=1e-8,
               p_star=None, max_sfo=None, max_comm=None, strict_feasible=False,
               comm_mode="separate", callback=None, return_swarm=False):
    """Deterministic gradient-tracking GDA with one plain mixing round per variable.

    Uses full local gradients every iteration (``n`` SFO calls per agent).
    Accepts a :class:`GdaConfig` or any config exposing ``eta``, ``gamma``,
    ``T`` and ``seed``.  Same return contract as :func:`dream_run`.
    """
    if problem.online:
        raise ModeError("the GDA baseline needs full local gradients (offline problem)")
    if comm_mode not in COMM_MODES:
        raise InvalidParameterError(f"comm_mode must be one of {COMM_MODES}, got {comm_mode!r}")
    z0 = _check_start(problem, z0)
    sfo = sfo if sfo is not None else SfoLedger()
    comm = comm if comm is not None else CommLedger()
    streams = Streams(config.seed, problem.m)
    z = np.tile(z0, (problem.m, 1))
    g = problem.full_local_grads(z, sfo)
    swarm = AgentSwarm(z=z, s=g.copy(), g=g)

    def step(sw):
        return gt_gda_step(sw, problem, config, w, sfo, comm, strict_feasible, comm_mode)

    alpha = getattr(config, "alpha", ALPHA)
    x_out, history, swarm = _run(problem, swarm, step, w, config.eta, alpha, config.T, streams,
                                 sfo, comm, diag_every, diag_tol, p_star, max_sfo, max_comm,
                                 callback)
    if return_swarm:
        return x_out, history, swarm
    return x_out, history



gt_gda_baseline_run = gt_gda_run
