"""Experiment driver: configuration, seeded sweeps, grid certification, CSV output."""
from __future__ import annotations

import csv
import dataclasses
import json
import math
import os
from dataclasses import dataclass, field
from typing import List, Optional, Sequence

import numpy as np
from scipy import ndimage

from . import __version__
from .envelope import (EnvelopeHandle, QuadraticCertificate, envelope_value,
                       grad_and_curvature, make_envelope, quadratic_certificate)
from .errors import ConfigError, MoreauEscapeError, OracleFailure
from .models import ModelKind, ModelOracle, OneSided, make_model
from .pgd import PgdMode, PgdParams, RunTrace, compute_params, practical_params, run_many
from .problems import PROBLEMS, Box, ProblemSpec, exact_prox, get_problem
from .prox_oracle import (OracleConfig, OracleMode, default_theta, prox_oracle,
                          required_K_one_sided, required_K_two_sided, validate)

MAX_EXECUTABLE_T = 10_000_000


@dataclass
class ExperimentConfig:
    problem: str = "abs_quartic"
    model: str = "prox-gradient"
    mu: Optional[float] = None
    oracle_mode: Optional[str] = None
    K: Optional[int] = None
    theta: Optional[float] = None
    oracle_a: float = 1e-3
    oracle_b: float = 0.1
    mode: str = "practical"
    eta: Optional[float] = None
    r: float = 0.04
    M: float = 50
    T: int = 5000
    eps1: float = 0.04
    eps2: float = 0.04
    delta: float = 0.1
    Delta_g: Optional[float] = None
    inits: object = field(default_factory=lambda: [[0.0, 1e-3]])
    seeds: object = field(default_factory=lambda: list(range(10)))
    outputs: str = "results"
    write_traces: bool = True
    record_envelope: bool = False
    minorant_samples: int = 1000

    @classmethod
    def from_mapping(cls, data: dict) -> "ExperimentConfig":
        names = {f.name for f in dataclasses.fields(cls)}
        unknown = sorted(set(data) - names)
        if unknown:
            raise ConfigError(unknown[0], "unknown configuration key")
        return cls(**data)

    def to_mapping(self) -> dict:
        return dataclasses.asdict(self)


def load_config(path: str, overrides: Optional[dict] = None) -> ExperimentConfig:
    with open(path) as fh:
        try:
            data = json.load(fh)
        except json.JSONDecodeError as exc:
            raise ConfigError(path, f"invalid JSON: {exc}") from None
    if not isinstance(data, dict):
        raise ConfigError(path, "top level must be an object")
    data.update({k: v for k, v in (overrides or {}).items() if v is not None})
    return ExperimentConfig.from_mapping(data)


@dataclass
class Resolved:
    """A validated configuration with every derived quantity filled in."""

    cfg: ExperimentConfig
    problem: ProblemSpec
    model: ModelOracle
    envelope: EnvelopeHandle
    oracle: Optional[OracleConfig]  # None means exact envelope gradients
    params: PgdParams
    inits: np.ndarray
    seeds: List[int]

    def manifest(self) -> dict:
        return {
            "version": __version__,
            "config": self.cfg.to_mapping(),
            "resolved": {
                "mu": self.envelope.mu,
                "L1": self.envelope.L1,
                "rho": self.problem.rho,
                "dim": self.problem.dim,
                "oracle": ({"mode": "exact"} if self.oracle is None else
                           {"mode": self.oracle.mode.value, "K": self.oracle.K,
                            "theta": self.oracle.theta_const, "a": self.oracle.a,
                            "b": self.oracle.b}),
                "pgd": self.params.as_dict(),
                "inits": self.inits.tolist(),
                "seeds": self.seeds,
            },
        }


def _finite_positive(name, value):
    if value is None or not isinstance(value, (int, float)) or not math.isfinite(value) or value <= 0:
        raise ConfigError(name, f"must be a positive number, got {value!r}")


def _resolve_inits(spec, problem: ProblemSpec) -> np.ndarray:
    d = problem.dim
    if isinstance(spec, dict):
        if len(spec) != 1:
            raise ConfigError("inits", "expected a single 'grid' or 'random' entry")
        (kind, opts), = spec.items()
        box = opts.get("box")
        box = problem.domain_box if box is None else Box(np.asarray(box[0], float), np.asarray(box[1], float))
        if kind == "grid":
            n = opts.get("n")
            if not isinstance(n, int) or n < 2:
                raise ConfigError("inits.grid.n", "need an integer >= 2")
            axes = [np.linspace(box.lo[i], box.hi[i], n) for i in range(d)]
            return np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, d)
        if kind == "random":
            count = opts.get("count")
            if not isinstance(count, int) or count < 1:
                raise ConfigError("inits.random.count", "need a positive integer")
            return box.sample(np.random.default_rng(opts.get("seed", 0)), count)
        raise ConfigError("inits", f"unknown init generator {kind!r}")
    try:
        arr = np.asarray(spec, dtype=float)
    except (TypeError, ValueError):
        raise ConfigError("inits", "expected a list of points") from None
    if arr.ndim != 2 or arr.shape[1] != d or arr.shape[0] == 0:
        raise ConfigError("inits", f"expected a nonempty list of {d}-vectors")
    if not np.all(problem.domain_box.contains(arr)):
        raise ConfigError("inits", "initial point outside the domain box")
    return arr


def _resolve_seeds(spec) -> List[int]:
    if isinstance(spec, dict):
        try:
            seeds = list(range(int(spec.get("start", 0)), int(spec["stop"])))
        except (KeyError, TypeError, ValueError):
            raise ConfigError("seeds", "range form needs integer 'stop' (and optional 'start')") from None
    elif isinstance(spec, (list, tuple)):
        seeds = spec
    else:
        raise ConfigError("seeds", "expected a list of integers or a {start, stop} range")
    if not seeds:
        raise ConfigError("seeds", "no seeds given")
    if not all(isinstance(s, (int, np.integer)) and s >= 0 for s in seeds):
        raise ConfigError("seeds", "seeds must be nonnegative integers")
    return [int(s) for s in seeds]


def resolve_oracle(problem: ProblemSpec, model: ModelOracle, mu: float, mode=None, K=None,
                   theta=None, a: float = 1e-3, b: float = 0.1) -> OracleConfig:
    """Fill in oracle defaults: the mode follows the model class, ``K`` the accuracy formulas."""
    try:
        mode = OracleMode(mode) if mode is not None else (
            OracleMode.ONE_SIDED if model.one_sided else OracleMode.TWO_SIDED)
    except ValueError:
        raise ConfigError("oracle_mode", f"unknown oracle mode {mode!r}") from None
    if mode is OracleMode.TWO_SIDED:
        if model.one_sided:
            raise ConfigError("oracle_mode", f"{model.kind.value} models are one-sided")
        q = model.accuracy.q
        theta = default_theta(mu, problem.rho, q) if theta is None else theta
        if K is None:
            K = required_K_two_sided(a, mu, problem.rho, q, theta)
    elif K is None:
        if not isinstance(model.accuracy, OneSided):
            raise ConfigError("K", "one-sided mode with a two-sided model needs an explicit K")
        K = required_K_one_sided(a, b, model.accuracy.L, mu, problem.rho)
    return OracleConfig(mode=mode, K=K, theta_const=theta, a=a, b=b)


def resolve(cfg: ExperimentConfig) -> Resolved:
    if cfg.problem not in PROBLEMS:
        raise ConfigError("problem", f"unknown problem {cfg.problem!r}")
    problem = get_problem(cfg.problem)
    try:
        kind = ModelKind(cfg.model)
    except ValueError:
        raise ConfigError("model", f"unknown model kind {cfg.model!r}") from None
    model = make_model(problem, kind)
    mu = problem.mu if cfg.mu is None else cfg.mu
    _finite_positive("mu", mu)
    if mu * problem.rho >= 1:
        raise ConfigError("mu", f"mu * rho must be below 1 (rho = {problem.rho})")
    envelope = make_envelope(problem, mu)
    for name in ("eps1", "eps2", "oracle_a"):
        _finite_positive(name, getattr(cfg, name))
    if cfg.oracle_a > 1:
        raise ConfigError("oracle_a", "must not exceed 1")
    try:
        if cfg.oracle_mode == "exact":
            oracle = None
        else:
            oracle = resolve_oracle(problem, model, mu, cfg.oracle_mode, cfg.K, cfg.theta,
                                    cfg.oracle_a, cfg.oracle_b)
            validate(oracle, problem, model, mu)
    except ConfigError:
        raise
    except (MoreauEscapeError, ValueError) as exc:
        raise ConfigError("oracle", str(exc)) from None

    try:
        mode = PgdMode(cfg.mode)
    except ValueError:
        raise ConfigError("mode", "expected 'theory' or 'practical'") from None
    if mode is PgdMode.THEORY:
        gap = 1.0 if cfg.Delta_g is None else cfg.Delta_g
        try:
            params = compute_params(cfg.eps1, cfg.eps2, cfg.delta, envelope.L1, problem.L2, gap,
                                    problem.dim, alpha=problem.alpha, beta=problem.beta)
        except (MoreauEscapeError, ValueError) as exc:
            raise ConfigError("mode", str(exc)) from None
        if params.T > MAX_EXECUTABLE_T:
            raise ConfigError("mode", f"theory-mode T = {params.T:.3e} is too large to execute")
    else:
        eta = 1.0 / envelope.L1 if cfg.eta is None else cfg.eta
        _finite_positive("eta", eta)
        if not (isinstance(cfg.T, int) and cfg.T >= 0):
            raise ConfigError("T", "must be a nonnegative integer")
        if cfg.r < 0 or cfg.M < 0:
            raise ConfigError("r" if cfg.r < 0 else "M", "must be nonnegative")
        params = practical_params(eta, cfg.r, cfg.M, cfg.T, cfg.eps1, cfg.eps2,
                                  L1=envelope.L1, L2=problem.L2, delta=cfg.delta, d=problem.dim)
    return Resolved(cfg=cfg, problem=problem, model=model, envelope=envelope, oracle=oracle,
                    params=params, inits=_resolve_inits(cfg.inits, problem),
                    seeds=_resolve_seeds(cfg.seeds))


def gradient_oracle(envelope: EnvelopeHandle, model: ModelOracle, oracle: Optional[OracleConfig]):
    """Batched ``G(X) = (X - ProxOracle(X)) / mu`` (rows are independent points).

    With ``oracle=None`` the exact prox is used instead.
    """
    problem, mu = envelope.problem, envelope.mu
    if oracle is None:
        return lambda X: (X - exact_prox(problem, problem.check_domain(X), mu).point) / mu

    def G(X):
        return (X - prox_oracle(problem, model, X, mu, oracle)) / mu
    return G


# -- certification ------------------------------------------------------------

@dataclass
class RunSummary:
    init_index: int
    seed: int
    x0: np.ndarray
    trace: RunTrace = field(repr=False)
    certified_steps: np.ndarray = field(repr=False)
    grad_norms: np.ndarray = field(repr=False)
    lambda_mins: np.ndarray = field(repr=False)
    certificate: Optional[QuadraticCertificate] = field(default=None, repr=False)

    @property
    def certified_t(self) -> Optional[int]:
        return int(self.certified_steps[0]) if self.certified_steps.size else None

    @property
    def certified_point(self) -> Optional[np.ndarray]:
        t = self.certified_t
        return None if t is None else self.trace.iterates[t]

    def row(self) -> dict:
        d = self.x0.size
        out = {"init": self.init_index, "seed": self.seed}
        out.update({f"x0_{i + 1}": _fmt(v) for i, v in enumerate(self.x0)})
        t = self.certified_t
        out["certified_t"] = "NONE" if t is None else t
        pt = self.certified_point
        out.update({f"xc_{i + 1}": ("" if pt is None else _fmt(pt[i])) for i in range(d)})
        if t is None:
            out.update(grad_norm="", lambda_min="", minorant_ok="")
        else:
            out.update(grad_norm=_fmt(self.grad_norms[0]), lambda_min=_fmt(self.lambda_mins[0]),
                       minorant_ok="" if self.certificate is None else int(self.certificate.holds))
        out["iterations"] = self.trace.G_norm.size
        out["escape_events"] = len(self.trace.perturb_events)
        out["certified_count"] = int(self.certified_steps.size)
        return out


def _fmt(v) -> str:
    return repr(float(v))


def certify_trace(envelope: EnvelopeHandle, trace: RunTrace, eps1: float, eps2: float):
    """Check every iterate whose oracle norm is at most ``eps1 / 2``.

    Returns the steps that pass together with their gradient norms and
    smallest Hessian eigenvalues.
    """
    cand = np.flatnonzero(trace.G_norm <= 0.5 * eps1)
    if cand.size == 0:
        empty = np.zeros(0)
        return cand, empty, empty
    pts = trace.iterates[cand]
    inside = envelope.problem.domain_box.contains(pts)
    gn, lam, rough = grad_and_curvature(envelope, pts)
    ok = inside & ~rough & (gn <= eps1) & (lam >= -eps2)
    return cand[ok], gn[ok], lam[ok]


@dataclass
class ExperimentResult:
    resolved: Resolved
    runs: List[RunSummary]
    summary_path: Optional[str] = None
    manifest_path: Optional[str] = None


def _summary_fields(d: int) -> list:
    return (["init", "seed"] + [f"x0_{i + 1}" for i in range(d)] + ["certified_t"]
            + [f"xc_{i + 1}" for i in range(d)]
            + ["grad_norm", "lambda_min", "minorant_ok", "iterations", "escape_events",
               "certified_count"])


def write_trace_csv(path: str, trace: RunTrace, envelope_values=None) -> None:
    d = trace.iterates.shape[1]
    header = ["t"] + [f"x_{i + 1}" for i in range(d)] + ["G_norm", "perturbed"]
    if envelope_values is not None:
        header.append("f_mu")
    perturbed = trace.perturbed
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for t in range(trace.G_norm.size):
            row = [t] + [_fmt(v) for v in trace.iterates[t]] + [_fmt(trace.G_norm[t]),
                                                                int(perturbed[t])]
            if envelope_values is not None:
                row.append(_fmt(envelope_values[t]))
            w.writerow(row)


def execute(res: Resolved) -> List[RunSummary]:
    """Run every (init, seed) pair and certify the traces; no files are written."""
    env, cfg = res.envelope, res.cfg
    G = gradient_oracle(env, res.model, res.oracle)
    starts = np.repeat(res.inits, len(res.seeds), axis=0)
    seeds = list(res.seeds) * len(res.inits)
    traces = run_many(G, starts, res.params, seeds)
    out = []
    for j, trace in enumerate(traces):
        steps, gn, lam = certify_trace(env, trace, cfg.eps1, cfg.eps2)
        cert = None
        if steps.size:
            cert = quadratic_certificate(env, trace.iterates[steps[0]], cfg.eps1, cfg.eps2,
                                         n_samples=cfg.minorant_samples, seed=trace.seed)
        out.append(RunSummary(init_index=j // len(res.seeds), seed=seeds[j], x0=starts[j],
                              trace=trace, certified_steps=steps, grad_norms=gn,
                              lambda_mins=lam, certificate=cert))
    return out


def run_experiment(cfg: ExperimentConfig, write: bool = True) -> ExperimentResult:
    """Resolve, run, certify and (optionally) write the traces, summary and manifest."""
    res = resolve(cfg)
    result = ExperimentResult(resolved=res, runs=[])
    if write:
        os.makedirs(cfg.outputs, exist_ok=True)
        result.manifest_path = os.path.join(cfg.outputs, "manifest.json")
        with open(result.manifest_path, "w") as fh:
            json.dump(res.manifest(), fh, indent=2, sort_keys=True)
    try:
        result.runs = execute(res)
    except OracleFailure:
        if write:
            _write_summary(os.path.join(cfg.outputs, "summary.csv"), res, [])
        raise
    if write:
        if cfg.write_traces:
            tdir = os.path.join(cfg.outputs, "traces")
            os.makedirs(tdir, exist_ok=True)
            for s in result.runs:
                fvals = None
                if cfg.record_envelope:
                    fvals = envelope_value(res.envelope, s.trace.iterates[:-1])
                    s.trace.envelope_values = fvals
                write_trace_csv(os.path.join(tdir, f"run_{s.init_index:04d}_{s.seed}.csv"),
                                s.trace, fvals)
        result.summary_path = os.path.join(cfg.outputs, "summary.csv")
        _write_summary(result.summary_path, res, result.runs)
    return result


def _write_summary(path: str, res: Resolved, runs: Sequence[RunSummary]) -> None:
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=_summary_fields(res.problem.dim))
        w.writeheader()
        for s in sorted(runs, key=lambda s: (s.init_index, s.seed)):
            w.writerow(s.row())


# -- grid oracle --------------------------------------------------------------

@dataclass
class GridReport:
    axes: List[np.ndarray]
    grad_norm: np.ndarray      # shape (n, ..., n)
    lambda_min: np.ndarray
    passed: np.ndarray
    not_smooth: np.ndarray
    mu: float
    eps1: float
    eps2: float

    @property
    def points(self) -> np.ndarray:
        return np.stack(np.meshgrid(*self.axes, indexing="ij"), axis=-1)

    def components(self):
        """Connected components (edge adjacency) of the passed region: ``(labels, count)``."""
        return ndimage.label(self.passed)

    def contains(self, pts) -> np.ndarray:
        """Whether each point lies in a grid cell with at least one passed corner."""
        pts = np.atleast_2d(np.asarray(pts, dtype=float))
        idx = []
        for i, ax in enumerate(self.axes):
            h = ax[1] - ax[0]
            j = np.floor((pts[:, i] - ax[0]) / h).astype(int)
            inside = (j >= 0) & (j < ax.size - 1) | np.isclose(pts[:, i], ax[-1])
            idx.append((np.clip(j, 0, ax.size - 2), inside))
        ok = np.all([inside for _, inside in idx], axis=0)
        hit = np.zeros(len(pts), dtype=bool)
        d = len(self.axes)
        for corner in range(2**d):
            sel = tuple(j + ((corner >> k) & 1) for k, (j, _) in enumerate(idx))
            hit |= self.passed[sel]
        return hit & ok

    def write_csv(self, path: str) -> None:
        pts = self.points.reshape(-1, len(self.axes))
        d = pts.shape[1]
        names = ["x", "y"] if d == 2 else [f"x_{i + 1}" for i in range(d)]
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(names + ["grad_norm", "lambda_min", "passed", "not_smooth"])
            for p, g, l, ok, ns in zip(pts, self.grad_norm.ravel(), self.lambda_min.ravel(),
                                       self.passed.ravel(), self.not_smooth.ravel()):
                w.writerow([_fmt(v) for v in p] + [_fmt(g), _fmt(l), int(ok), int(ns)])


def grid_certify(problem_name: str, mu: Optional[float], eps1: float, eps2: float,
                 box: Optional[Box] = None, n: int = 301, chunk: int = 100_000) -> GridReport:
    """Second-order criticality test on a uniform grid (the brute-force region oracle)."""
    if n < 2:
        raise ConfigError("n", "need at least 2 points per axis")
    problem = get_problem(problem_name)
    env = make_envelope(problem, mu)
    box = problem.domain_box if box is None else box
    axes = [np.linspace(box.lo[i], box.hi[i], n) for i in range(problem.dim)]
    pts = np.stack(np.meshgrid(*axes, indexing="ij"), axis=-1).reshape(-1, problem.dim)
    gn = np.empty(len(pts))
    lam = np.empty(len(pts))
    rough = np.empty(len(pts), dtype=bool)
    for s in range(0, len(pts), chunk):
        gn[s:s + chunk], lam[s:s + chunk], rough[s:s + chunk] = grad_and_curvature(env, pts[s:s + chunk])
    shape = (n,) * problem.dim
    passed = (gn <= eps1) & (lam >= -eps2) & ~rough
    return GridReport(axes=axes, grad_norm=gn.reshape(shape), lambda_min=lam.reshape(shape),
                      passed=passed.reshape(shape), not_smooth=rough.reshape(shape),
                      mu=env.mu, eps1=eps1, eps2=eps2)


def envelope_minimizers(problem: ProblemSpec, mu: Optional[float] = None) -> np.ndarray:
    """Declared minimizers of ``f``, which are also the minimizers of its envelope."""
    return np.asarray(problem.minimizers, dtype=float).reshape(-1, problem.dim)
