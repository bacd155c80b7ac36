"""Experiment orchestration and the command-line front end.

A run writes ``<name>.csv`` with one row per diagnostics record and a
``<name>.meta.json`` sidecar holding everything needed to re-derive the
parameters.  Configuration comes from flat ``key = value`` files, overridden
by command-line flags.
"""

import argparse
import csv
import dataclasses
import json
import logging
import math
import os
import subprocess
import sys
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import __version__
from .data import load_libsvm, partition
from .errors import DreamError, InvalidParameterError, ParseError
from .metrics import RunRecord, optimization_error
from .optimizer import (
    AgentSwarm,
    DreamConfig,
    GdaConfig,
    derive_config,
    dream_run,
    gt_gda_run,
)
from .problem import QuadraticProblem, RobustLogRegProblem
from .topology import build_complete_averaging, build_lazy_ring

log = logging.getLogger(__name__)

COLUMNS = RunRecord.columns()
ALGOS = ("dream", "gt-gda")
CONFIG_FIELDS = {f.name for f in dataclasses.fields(DreamConfig)}


@dataclass(frozen=True)
class Fixture:
    """Synthetic problem with closed-form ``P``, plus its default run settings."""

    build: object
    m: int
    tau: float
    start: float
    max_iters: int
    diag_every: int
    mode: str = "offline"
    sigma: float = None
    overrides: dict = field(default_factory=dict)


def _quad(m, n=1, **kw):
    return lambda m_, **extra: QuadraticProblem(m=m_, n=n, **{**kw, **extra})


_DEMO = {"eta": 0.05, "gamma": 0.5, "K0": 20, "K": 5, "K_prime": 10}

FIXTURES = {
    # deterministic: one sample per agent and a full refresh every iteration
    "quad-m4": Fixture(_quad(4), m=4, tau=0.99, start=1.0, max_iters=500_000,
                       diag_every=5_000, overrides={"p": 1.0}),
    "quad-box": Fixture(_quad(4, constraint="box:0.5"), m=4, tau=0.99, start=0.5,
                        max_iters=500_000, diag_every=5_000, overrides={"p": 1.0}),
    # heterogeneous agents: the derived schedule needs hundreds of mixing rounds per step and
    # ~4e5 steps, so these demos default to larger steps and a few rounds
    "quad-shift-m8": Fixture(_quad(8, n=2, sigma=0.1, shift=0.5), m=8, tau=0.99, start=1.0,
                             max_iters=20_000, diag_every=200, overrides=_DEMO),
    "quad-online-m8": Fixture(_quad(8, n=None, sigma=0.1, shift=0.5), m=8, tau=0.99,
                              start=1.0, max_iters=20_000, diag_every=200, mode="online",
                              sigma=0.1, overrides={**_DEMO, "b_prime": 256}),
}


@dataclass
class ExperimentConfig:
    dataset: str = None
    fixture: str = None
    algo: str = "dream"
    m: int = None
    tau: float = None
    topology: str = "ring"
    mode: str = None
    epsilon: float = 1e-3
    L: float = None
    mu: float = None
    sigma: float = None
    psi0: float = None
    p_star: float = None
    seed: int = 0
    max_sfo: int = None
    max_comm: int = None
    max_iters: int = None
    out: str = "runs"
    name: str = None
    diag_every: int = None
    diag_tol: float = 1e-8
    strict_feasible: bool = False
    comm_mode: str = "separate"
    d_x: int = None
    subset: int = None
    subset_seed: int = 0
    partition_seed: int = 0
    pad: bool = False
    overrides: dict = field(default_factory=dict)

    def validate(self):
        if (self.dataset is None) == (self.fixture is None):
            raise InvalidParameterError("set exactly one of dataset or fixture")
        if self.fixture is not None and self.fixture not in FIXTURES:
            raise InvalidParameterError(
                f"unknown fixture {self.fixture!r}; choose from {sorted(FIXTURES)}"
            )
        if self.algo not in ALGOS:
            raise InvalidParameterError(f"algo must be one of {ALGOS}, got {self.algo!r}")
        for name in ("max_sfo", "max_comm", "max_iters"):
            value = getattr(self, name)
            if value is not None and value <= 0:
                raise InvalidParameterError(f"{name} must be positive, got {value}")
        unknown = set(self.overrides) - CONFIG_FIELDS
        if unknown:
            raise InvalidParameterError(f"unknown override keys {sorted(unknown)}")
        return self

    @property
    def run_name(self):
        return self.name or f"{self.algo}-seed{self.seed}"


# config files ---------------------------------------------------------------

_FIELD_TYPES = {f.name: f.type for f in dataclasses.fields(ExperimentConfig)}


def _coerce(key, text):
    kind = _FIELD_TYPES[key]
    if kind is bool:
        return text.strip().lower() in ("1", "true", "yes", "on")
    if kind is int:
        return int(float(text)) if "e" in text.lower() else int(text)
    if kind is float:
        return float(text)
    return text


def _coerce_override(key, text):
    if key == "mode":
        return text
    value = float(text)
    return int(value) if key in ("b", "b_prime", "K0", "K", "K_prime", "T", "seed") else value


def parse_config_text(lines):
    """Parse flat ``key = value`` lines into a dict of :class:`ExperimentConfig` fields.

    Keys ``set.<field>`` become DreamConfig overrides.  ``#`` starts a comment.
    """
    values, overrides = {}, {}
    for lineno, line in enumerate(lines, start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        key, sep, value = line.partition("=")
        key, value = key.strip().replace("-", "_"), value.strip()
        if not sep or not key:
            raise ParseError(f"expected key = value, got {line!r}", lineno)
        try:
            if key.startswith("set."):
                overrides[key[4:]] = _coerce_override(key[4:], value)
            elif key in _FIELD_TYPES and key != "overrides":
                values[key] = _coerce(key, value)
            else:
                raise ParseError(f"unknown key {key!r}", lineno)
        except ValueError as err:
            if isinstance(err, ParseError):
                raise
            raise ParseError(f"bad value for {key}: {value!r}", lineno) from None
    if overrides:
        values["overrides"] = overrides
    return values


def load_config(path, **flags):
    """Read a config file, then apply non-``None`` ``flags`` on top."""
    with open(path) as fh:
        values = parse_config_text(fh)
    overrides = {**values.pop("overrides", {}), **flags.pop("overrides", {})}
    values.update({k: v for k, v in flags.items() if v is not None})
    return ExperimentConfig(overrides=overrides, **values).validate()


# CSV ------------------------------------------------------------------------

def _fmt(value):
    if value is None:
        return ""
    if isinstance(value, (int, np.integer)) and not isinstance(value, bool):
        return str(int(value))
    return repr(float(value))


def write_records(path, records):
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(COLUMNS)
        for rec in records:
            writer.writerow([_fmt(v) for v in rec.as_tuple()])


def read_records(path):
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        if tuple(header) != COLUMNS:
            raise ParseError(f"unexpected CSV header {header}")
        for row in reader:
            vals = []
            for name, text in zip(COLUMNS, row):
                if text == "":
                    vals.append(None)
                elif name in ("t", "sfo", "comm"):
                    vals.append(int(text))
                else:
                    vals.append(float(text))
            out.append(RunRecord(*vals))
    return out


def version_string():
    """``git describe`` of the source tree when available, else the package version."""
    here = os.path.dirname(os.path.abspath(__file__))
    try:
        desc = subprocess.run(
            ["git", "describe", "--always", "--dirty", "--tags"],
            cwd=here, capture_output=True, text=True, timeout=5,
        )
    except (OSError, subprocess.SubprocessError):
        return __version__
    if desc.returncode != 0 or not desc.stdout.strip():
        return __version__
    return f"{__version__}+{desc.stdout.strip()}"


# building a run ---------------------------------------------------------------

@dataclass
class Setup:
    problem: object
    w: object
    z0: np.ndarray
    derive_inputs: dict
    dream: DreamConfig
    iterations: int
    diag_every: int
    p_star: float
    overrides: dict


def _build_problem(cfg):
    if cfg.fixture is not None:
        fx = FIXTURES[cfg.fixture]
        m = cfg.m or fx.m
        extra = {k: v for k, v in (("L", cfg.L), ("mu", cfg.mu)) if v is not None}
        problem = fx.build(m, **extra)
        z0 = np.full(problem.d, fx.start)
        return problem, z0, fx
    data = load_libsvm(cfg.dataset, cfg.d_x)
    if cfg.subset is not None:
        data = data.subset(cfg.subset, cfg.subset_seed)
    data = partition(data, cfg.m or 8, seed=cfg.partition_seed, pad=cfg.pad)
    problem = RobustLogRegProblem(data, L=cfg.L, mu=1.0 if cfg.mu is None else cfg.mu,
                                  sigma=cfg.sigma)
    z0 = np.concatenate([np.zeros(problem.d_x), np.full(problem.d_y, 1.0 / problem.d_y)])
    return problem, z0, None


def _build_topology(cfg, m, fx):
    if m == 1 or cfg.topology == "complete":
        return build_complete_averaging(m)
    if cfg.topology != "ring":
        raise InvalidParameterError(f"unknown topology {cfg.topology!r}")
    tau = cfg.tau if cfg.tau is not None else (fx.tau if fx else 0.999)
    return build_lazy_ring(m, tau)


def initial_psi(problem, z0, alpha, p_star=None):
    """Upper bound on the initial optimization error, from ``P*`` or a lower bound on it."""
    bound = p_star if p_star is not None else problem.p_star
    if bound is None:
        bound = problem.primal_lower_bound
    if bound is None:
        return None
    swarm = AgentSwarm(z=z0[None, :], s=np.zeros((1, problem.d)), g=np.zeros((1, problem.d)))
    return optimization_error(swarm, problem, alpha, p_star=bound)


def prepare(cfg):
    """Resolve an :class:`ExperimentConfig` into problem, topology and derived parameters."""
    cfg.validate()
    problem, z0, fx = _build_problem(cfg)
    w = _build_topology(cfg, problem.m, fx)
    mode = cfg.mode or (fx.mode if fx else "offline")
    sigma = cfg.sigma if cfg.sigma is not None else (fx.sigma if fx else problem.sigma)
    psi0 = cfg.psi0
    if psi0 is None:
        psi0 = initial_psi(problem, z0, 1.0 / 8.0, cfg.p_star)
    inputs = dict(
        L=problem.L,
        kappa=problem.kappa,
        epsilon=cfg.epsilon,
        m=problem.m,
        n=None if mode == "online" else problem.n,
        sigma=sigma,
        delta=w.delta,
        psi0=psi0,
        seed=cfg.seed,
    )
    if psi0 is None and "T" not in cfg.overrides:
        if cfg.max_iters is None:
            raise InvalidParameterError("initial error unknown: give psi0, set.T or max_iters")
        inputs["T"] = cfg.max_iters
    overrides = {**(fx.overrides if fx else {}), **cfg.overrides}
    dream = derive_config(**inputs, **overrides)
    cap = cfg.max_iters if cfg.max_iters is not None else (fx.max_iters if fx else None)
    iterations = dream.T if cap is None else min(dream.T, cap)
    diag_every = cfg.diag_every
    if diag_every is None:
        diag_every = fx.diag_every if fx else max(1, iterations // 200)
    p_star = cfg.p_star if cfg.p_star is not None else problem.p_star
    return Setup(problem, w, z0, inputs, dream, iterations, diag_every, p_star, overrides)


def _jsonable(obj):
    if isinstance(obj, dict):
        return {k: _jsonable(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonable(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return obj.tolist()
    if isinstance(obj, np.generic):
        return obj.item()
    return obj


@dataclass
class RunOutcome:
    status: int
    name: str
    records: list
    csv_path: str = None
    meta_path: str = None
    x_out: np.ndarray = None
    error: str = None
    error_code: str = None


def run_experiment(cfg, write=True):
    """Run one configuration; errors become a nonzero ``status`` with a message."""
    try:
        return _run_experiment(cfg, write)
    except DreamError as err:
        log.error("%s: %s", err.code, err)
        records = getattr(err, "history", [])
        return RunOutcome(status=err.exit_status, name=cfg.run_name, records=records,
                          error=str(err), error_code=err.code)


def _run_experiment(cfg, write):
    setup = prepare(cfg)
    cfg_run = setup.dream.replace(T=setup.iterations)
    kwargs = dict(diag_every=setup.diag_every, diag_tol=cfg.diag_tol, p_star=setup.p_star,
                  max_sfo=cfg.max_sfo, max_comm=cfg.max_comm,
                  strict_feasible=cfg.strict_feasible, comm_mode=cfg.comm_mode,
                  return_swarm=True)
    start = time.perf_counter()
    if cfg.algo == "dream":
        x_out, history, swarm = dream_run(setup.problem, cfg_run, setup.z0, setup.w, **kwargs)
    else:
        gda = GdaConfig(eta=cfg_run.eta, gamma=cfg_run.gamma, T=cfg_run.T, seed=cfg_run.seed,
                        alpha=cfg_run.alpha)
        x_out, history, swarm = gt_gda_run(setup.problem, gda, setup.z0, setup.w, **kwargs)
    wall = time.perf_counter() - start
    outcome = RunOutcome(status=0, name=cfg.run_name, records=history, x_out=x_out)
    if write:
        os.makedirs(cfg.out, exist_ok=True)
        outcome.csv_path = os.path.join(cfg.out, f"{cfg.run_name}.csv")
        outcome.meta_path = os.path.join(cfg.out, f"{cfg.run_name}.meta.json")
        write_records(outcome.csv_path, history)
        meta = {
            "version": version_string(),
            "algo": cfg.algo,
            "experiment": dataclasses.asdict(cfg),
            "derive_inputs": setup.derive_inputs,
            "overrides": setup.overrides,
            "config": setup.dream.as_dict(),
            "iterations_run": swarm.t,
            "iterations_planned": setup.iterations,
            "diag_every": setup.diag_every,
            "topology": {
                "m": setup.w.m,
                "lambda2": setup.w.lambda2,
                "delta": setup.w.delta,
                "eigenvalues": setup.w.eigenvalues,
            },
            "problem": setup.problem.describe(),
            "x_out": x_out,
            "wall_clock_seconds": wall,
        }
        with open(outcome.meta_path, "w") as fh:
            json.dump(_jsonable(meta), fh, indent=2, sort_keys=True)
            fh.write("\n")
    return outcome


# comparisons ------------------------------------------------------------------

MERGED_COLUMNS = ("name", "algo", "seed", "status") + COLUMNS + ("primal_gap",)


def compare(configs, out=None, jobs=1):
    """Run several configurations and merge their records.

    Returns ``(rows, outcomes)``; each row is a dict keyed by
    :data:`MERGED_COLUMNS`, sorted by ``(algo, seed, t)``.  ``primal_gap`` is
    measured from the smallest primal value seen across all runs (an
    empirical floor, not ``P*``).  A failed run contributes its partial
    records and a nonzero status; the others still run.
    """
    configs = list(configs)
    if not configs:
        raise InvalidParameterError("compare needs at least one configuration")
    names = [c.run_name for c in configs]
    if len(set(names)) != len(names):
        raise InvalidParameterError(f"run names must be distinct, got {names}")
    if jobs > 1:
        with ProcessPoolExecutor(max_workers=jobs) as pool:
            outcomes = list(pool.map(run_experiment, configs))
    else:
        outcomes = [run_experiment(c) for c in configs]
    primals = [r.primal for o in outcomes for r in o.records if r.primal is not None]
    floor = min(primals) if primals else None
    rows = []
    for cfg, outcome in zip(configs, outcomes):
        for rec in outcome.records:
            row = dict(name=outcome.name, algo=cfg.algo, seed=cfg.seed, status=outcome.status)
            row.update(zip(COLUMNS, rec.as_tuple()))
            row["primal_gap"] = None if floor is None else rec.primal - floor
            rows.append(row)
    rows.sort(key=lambda r: (r["algo"], r["seed"], r["t"], r["name"]))
    if out is not None:
        os.makedirs(out, exist_ok=True)
        with open(os.path.join(out, "compare.csv"), "w", newline="") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(MERGED_COLUMNS)
            for row in rows:
                writer.writerow([row[c] if isinstance(row[c], str) else _fmt(row[c])
                                 for c in MERGED_COLUMNS])
    return rows, outcomes


def primal_at_budget(records, budget, key="sfo"):
    """Primal value of the last record whose ``key`` counter does not exceed ``budget``."""
    eligible = [r for r in records if getattr(r, key) <= budget]
    if not eligible:
        return math.nan
    return eligible[-1].primal


# command line -------------------------------------------------------------------

def _add_run_flags(parser):
    src = parser.add_mutually_exclusive_group()
    src.add_argument("--dataset", metavar="PATH")
    src.add_argument("--fixture", metavar="NAME", choices=sorted(FIXTURES))
    parser.add_argument("--config", metavar="FILE", help="key = value file; flags win")
    parser.add_argument("--algo", choices=ALGOS)
    parser.add_argument("--m", type=int)
    parser.add_argument("--tau", type=float)
    parser.add_argument("--topology", choices=("ring", "complete"))
    parser.add_argument("--mode", choices=("online", "offline"))
    parser.add_argument("--epsilon", type=float)
    parser.add_argument("--L", type=float)
    parser.add_argument("--mu", type=float)
    parser.add_argument("--sigma", type=float)
    parser.add_argument("--psi0", type=float)
    parser.add_argument("--p-star", type=float)
    parser.add_argument("--seed", type=int)
    parser.add_argument("--max-sfo", type=int)
    parser.add_argument("--max-comm", type=int)
    parser.add_argument("--max-iters", type=int)
    parser.add_argument("--out", metavar="DIR")
    parser.add_argument("--name")
    parser.add_argument("--diag-every", type=int)
    parser.add_argument("--strict-feasible", action="store_true", default=None)
    parser.add_argument("--comm-mode", choices=("separate", "concatenated"))
    parser.add_argument("--d-x", type=int)
    parser.add_argument("--subset", type=int)
    parser.add_argument("--pad", action="store_true", default=None)
    parser.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any derived DreamConfig field")


def config_from_args(args):
    overrides = {}
    for item in args.set:
        key, sep, value = item.partition("=")
        if not sep or key not in CONFIG_FIELDS:
            raise InvalidParameterError(f"bad --set {item!r}; keys: {sorted(CONFIG_FIELDS)}")
        try:
            overrides[key] = _coerce_override(key, value)
        except ValueError:
            raise InvalidParameterError(f"bad value in --set {item!r}") from None
    flags = {k: v for k, v in vars(args).items()
             if k in _FIELD_TYPES and k != "overrides" and v is not None}
    flags["overrides"] = overrides
    if args.config:
        return load_config(args.config, **flags)
    return ExperimentConfig(**flags).validate()


def build_parser():
    parser = argparse.ArgumentParser(prog="dreamopt", description=__doc__.splitlines()[0])
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)
    _add_run_flags(sub.add_parser("run", help="run one experiment"))
    cmp_parser = sub.add_parser("compare", help="run several config files and merge results")
    cmp_parser.add_argument("configs", nargs="*", metavar="FILE")
    cmp_parser.add_argument("--out", metavar="DIR", default="runs")
    cmp_parser.add_argument("--jobs", type=int, default=1)
    return parser


def main(argv=None):
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        if args.command == "run":
            outcome = run_experiment(config_from_args(args))
            if outcome.status:
                print(f"error[{outcome.error_code}]: {outcome.error}", file=sys.stderr)
                return outcome.status
            last = outcome.records[-1]
            print(f"{outcome.csv_path}: t={last.t} sfo={last.sfo} comm={last.comm} "
                  f"grad_p_norm={last.grad_p_norm:.6g} primal={last.primal:.10g}")
            return 0
        if not args.configs:
            parser.error("compare needs at least one config file")
        configs = [load_config(path, out=args.out) for path in args.configs]
        rows, outcomes = compare(configs, out=args.out, jobs=args.jobs)
        for o in outcomes:
            state = "ok" if o.status == 0 else f"error[{o.error_code}]: {o.error}"
            print(f"{o.name}: {state}")
        print(os.path.join(args.out, "compare.csv"))
        return max(o.status for o in outcomes)
    except DreamError as err:
        print(f"error[{err.code}]: {err}", file=sys.stderr)
        return err.exit_status
    except OSError as err:
        print(f"error[io]: {err}", file=sys.stderr)
        return 7


if __name__ == "__main__":
    sys.exit(main())
