"""Inexact proximal map from repeated model-based proximal steps.

One-sided models use the growing proximal weights
``theta_k = (1/mu - rho)(k + 1)/2`` and return the weighted average of the
iterates; two-sided models use a constant weight ``theta > q`` and return
the last iterate, which contracts geometrically toward the exact prox.
"""
from __future__ import annotations

import enum
import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from .errors import InvalidAccuracy, NotContractive, NotStronglyConvex
from .models import ModelOracle, TwoSided, prox_step
from .problems import ProblemSpec


class OracleMode(enum.Enum):
    ONE_SIDED = "one-sided"
    TWO_SIDED = "two-sided"


@dataclass(frozen=True)
class OracleConfig:
    mode: OracleMode
    K: int
    theta_const: Optional[float] = None
    a: float = 0.1
    b: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "mode", OracleMode(self.mode))
        if int(self.K) != self.K or self.K < 0:
            raise ValueError(f"K must be a nonnegative integer, got {self.K}")
        object.__setattr__(self, "K", int(self.K))
        if self.mode is OracleMode.TWO_SIDED and (self.theta_const is None or self.theta_const <= 0):
            raise ValueError("two-sided mode needs a positive theta_const")


def validate(cfg: OracleConfig, problem: ProblemSpec, model: ModelOracle, mu: float) -> None:
    """Raise ``NotStronglyConvex`` unless ``cfg`` meets its preconditions."""
    if mu <= 0 or 1.0 / mu <= problem.rho:
        raise NotStronglyConvex(f"need 1/mu > rho, got mu={mu}, rho={problem.rho}")
    if cfg.mode is OracleMode.TWO_SIDED:
        if not isinstance(model.accuracy, TwoSided):
            raise NotStronglyConvex("two-sided mode needs a two-sided model")
        q = model.accuracy.q
        if not cfg.theta_const > q:
            raise NotStronglyConvex(f"theta={cfg.theta_const} must exceed q={q}")
        if not 1.0 / mu > problem.rho + q:
            raise NotStronglyConvex(f"1/mu={1.0 / mu} must exceed rho + q = {problem.rho + q}")


def default_theta(mu: float, rho: float, q: float) -> float:
    """A two-sided weight strictly between ``q`` and ``1/mu - rho``."""
    return q + 0.1 * (1.0 / mu - rho - q)


def one_sided_thetas(K: int, mu: float, rho: float) -> np.ndarray:
    return 0.5 * (1.0 / mu - rho) * (np.arange(K + 1) + 1.0)


def prox_oracle(problem: ProblemSpec, model: ModelOracle, x0, mu: float, cfg: OracleConfig,
                record: bool = False):
    """Approximate ``prox_{mu f}(x0)``; batched over leading axes of ``x0``.

    With ``record=True`` also returns the array of inner iterates
    ``x_0, x_1, ...`` stacked along a new leading axis.
    """
    validate(cfg, problem, model, mu)
    x0 = np.asarray(x0, dtype=float)
    xk = x0
    trail = [x0] if record else None
    if cfg.mode is OracleMode.ONE_SIDED:
        out = one_sided_averages(problem, model, x0, mu, [cfg.K], trail)[cfg.K]
    else:
        for _ in range(cfg.K):
            xk = prox_step(model, problem, x0, xk, cfg.theta_const, mu)
            if record:
                trail.append(xk)
        out = xk
    if record:
        return out, np.stack(trail)
    return out


def one_sided_averages(problem: ProblemSpec, model: ModelOracle, x0, mu: float, Ks,
                       trail: Optional[list] = None) -> dict:
    """Weighted averages of the one-sided iteration for several budgets at once.

    The proximal weights do not depend on the budget, so one pass up to
    ``max(Ks)`` yields the output for every ``K`` in ``Ks``.
    """
    if mu <= 0 or 1.0 / mu <= problem.rho:
        raise NotStronglyConvex(f"need 1/mu > rho, got mu={mu}, rho={problem.rho}")
    x0 = np.asarray(x0, dtype=float)
    wanted = sorted(set(int(K) for K in Ks))
    out = {}
    xk = x0
    acc = np.zeros_like(x0)
    for k, theta in enumerate(one_sided_thetas(wanted[-1], mu, problem.rho)):
        xk = prox_step(model, problem, x0, xk, theta, mu)
        acc += (k + 2) * xk  # weight (j + 1) on x_j, j = k + 1
        if trail is not None:
            trail.append(xk)
        if k == wanted[0]:
            K = wanted.pop(0)
            out[K] = acc * (2.0 / ((K + 2) * (K + 3) - 2))
    return out


def _check_accuracy(a: float, b: Optional[float] = None) -> None:
    if not 0 < a <= 1:
        raise InvalidAccuracy(f"relative accuracy a must lie in (0, 1], got {a}")
    if b is not None and not b > 0:
        raise InvalidAccuracy(f"absolute accuracy b must be positive, got {b}")


def required_K_one_sided(a: float, b: float, L: float, mu: float, rho: float) -> int:
    """Inner iterations for a one-sided model: ``4/a + 16 L^2/((1 - mu rho)^2 b^2)``."""
    _check_accuracy(a, b)
    if mu * rho >= 1:
        raise NotStronglyConvex("need mu * rho < 1")
    return math.ceil(4.0 / a + 16.0 * L * L / ((1.0 - mu * rho) ** 2 * b * b))


def required_K_two_sided(a: float, mu: float, rho: float, q: float, theta: float) -> int:
    """Inner iterations for a two-sided model: ``2 log(1/a) / log((1/mu - rho + theta)/(q + theta))``."""
    _check_accuracy(a)
    ratio = (1.0 / mu - rho + theta) / (q + theta)
    if not ratio > 1.0:
        raise NotContractive(f"contraction ratio {ratio} is not above 1")
    return math.ceil(2.0 * math.log(1.0 / a) / math.log(ratio))


def contraction_factor(mu: float, rho: float, q: float, theta: float) -> float:
    """Per-step squared-distance factor ``(theta + q) / (1/mu - rho + theta)``."""
    return (theta + q) / (1.0 / mu - rho + theta)
