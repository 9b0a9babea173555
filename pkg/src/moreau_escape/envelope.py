"""Moreau envelope values, gradients, Hessians and criticality certificates.

The envelope ``f_mu(x) = min_y f(y) + |y - x|^2 / (2 mu)`` is evaluated through
the ground-truth proximal solver; its gradient is ``(x - prox(x)) / mu``.
The inexact gradient replaces the exact prox by the model-based oracle.
All array routines broadcast over leading axes of ``x``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .errors import MuTooLarge, NotSmooth
from .models import ModelOracle
from .problems import ProblemSpec, exact_prox
from .prox_oracle import OracleConfig, prox_oracle

PROX_TOL = 1e-12


@dataclass(frozen=True)
class EnvelopeHandle:
    problem: ProblemSpec
    mu: float

    def __post_init__(self):
        if not self.mu > 0:
            raise MuTooLarge("mu must be positive")
        if self.mu * self.problem.rho >= 1.0:
            raise MuTooLarge(f"mu={self.mu} violates mu*rho < 1 (rho={self.problem.rho})")

    @property
    def L1(self) -> float:
        """Gradient Lipschitz constant ``max{1/mu, rho/(1 - mu rho)}``."""
        rho = self.problem.rho
        return max(1.0 / self.mu, rho / (1.0 - self.mu * rho))


def make_envelope(problem: ProblemSpec, mu: Optional[float] = None) -> EnvelopeHandle:
    return EnvelopeHandle(problem, problem.mu if mu is None else float(mu))


def _prox(h: EnvelopeHandle, x) -> np.ndarray:
    return exact_prox(h.problem, x, h.mu, PROX_TOL).point


def envelope_value(h: EnvelopeHandle, x) -> np.ndarray:
    x = h.problem.check_domain(x)
    y = _prox(h, x)
    return h.problem.objective.value(y) + np.sum((y - x) ** 2, axis=-1) / (2.0 * h.mu)


def exact_grad(h: EnvelopeHandle, x) -> np.ndarray:
    x = h.problem.check_domain(x)
    return (x - _prox(h, x)) / h.mu


def inexact_grad(h: EnvelopeHandle, x, model: ModelOracle, cfg: OracleConfig) -> np.ndarray:
    """``G(x) = (x - ProxOracle(x)) / mu``."""
    x = h.problem.check_domain(x)
    return (x - prox_oracle(h.problem, model, x, h.mu, cfg)) / h.mu


def fd_step(x) -> np.ndarray:
    return np.maximum(1e-5, 1e-7 * np.linalg.norm(np.asarray(x, dtype=float), axis=-1))


def fd_hessian_batch(h: EnvelopeHandle, x, step=None):
    """Central-difference Jacobian of the exact gradient.

    Returns ``(H, asymmetry, bound)`` with ``H`` symmetrized; ``bound`` is the
    asymmetry level beyond which the envelope is deemed not C^2 at ``x``.
    Points are not domain-checked, so a box-edge point may be differenced.
    """
    x = np.asarray(x, dtype=float)
    d = x.shape[-1]
    step = fd_step(x) if step is None else np.broadcast_to(np.asarray(step, float), x.shape[:-1])
    s = step[..., None]
    cols = []
    for i in range(d):
        e = np.zeros(d)
        e[i] = 1.0
        gp = (x + s * e - _prox(h, x + s * e)) / h.mu
        gm = (x - s * e - _prox(h, x - s * e)) / h.mu
        cols.append((gp - gm) / (2.0 * s))
    J = np.stack(cols, axis=-1)
    asym = np.linalg.norm(J - np.swapaxes(J, -1, -2), axis=(-2, -1))
    H = 0.5 * (J + np.swapaxes(J, -1, -2))
    scale = np.maximum(1.0, np.linalg.norm(H, ord=2, axis=(-2, -1)))
    truncation = step**2 * np.maximum(scale, h.problem.L2)
    rounding = 4.0 * PROX_TOL * (1.0 + np.linalg.norm(x, axis=-1)) / (h.mu * step)
    return H, asym, 100.0 * (truncation + rounding)


def fd_hessian(h: EnvelopeHandle, x, step: Optional[float] = None):
    """Symmetrized finite-difference Hessian of the envelope at one point.

    Returns ``(H, asymmetry)``; raises ``NotSmooth`` when the asymmetry
    exceeds 100 times the expected finite-difference error.
    """
    x = h.problem.check_domain(x)
    if step is not None and not step > 0:
        raise ValueError("step must be positive")
    H, asym, bound = fd_hessian_batch(h, x, step)
    if np.any(asym > bound):
        raise NotSmooth(f"Hessian asymmetry {float(np.max(asym)):.3e} exceeds {float(np.max(bound)):.3e}")
    return H, float(asym) if np.ndim(asym) == 0 else asym


# -- certificates ------------------------------------------------------------

@dataclass
class QuadraticCertificate:
    """Quadratic ``q(y) = c + <g, y - xhat> - (3 eps2 / 2)|y - xhat|^2`` lying below ``f`` near ``xhat``."""

    x: np.ndarray
    xhat: np.ndarray
    constant: float
    linear: np.ndarray
    curvature: float
    neighborhood_radius: float
    mu: float
    eps1: float
    eps2: float
    f_xhat: float
    minorant_gap: float  # min over samples of f(y) - q(y)
    n_samples: int
    hypothesis_ok: bool  # whether eps1 <= eps2 / (2 L2 mu) held

    def q(self, y) -> np.ndarray:
        dy = np.asarray(y, dtype=float) - self.xhat
        return self.constant + dy @ self.linear - 0.5 * self.curvature * np.sum(dy * dy, axis=-1)

    def grad_q(self, y) -> np.ndarray:
        return self.linear - self.curvature * (np.asarray(y, dtype=float) - self.xhat)

    def hessian_q(self) -> np.ndarray:
        return -self.curvature * np.eye(self.xhat.size)

    def checks(self, tol: float = 1e-9) -> dict:
        """Each certificate property as a separate boolean."""
        mu, e1, e2 = self.mu, self.eps1, self.eps2
        d = self.xhat.size
        return {
            "nearby_point": bool(np.linalg.norm(self.x - self.xhat) <= mu * e1 + tol),
            "small_subgradient": bool(np.linalg.norm(self.grad_q(self.xhat)) <= e1 + tol),
            "negative_curvature": bool(np.allclose(self.hessian_q(), -3.0 * e2 * np.eye(d),
                                                   rtol=0, atol=tol)),
            "approximate_match": bool(self.f_xhat - float(self.q(self.xhat))
                                      <= 0.5 * mu * (1.0 + 3.0 * mu * e2) * e1 * e1 + tol),
            "minorant": bool(self.minorant_gap >= -tol),
        }

    @property
    def holds(self) -> bool:
        return all(self.checks().values())


@dataclass
class CriticalityCertificate:
    point: np.ndarray
    grad_norm: float
    lambda_min: float
    eps1: float
    eps2: float
    passed: bool
    minorant: Optional[QuadraticCertificate] = field(default=None, repr=False)

    def record(self) -> dict:
        """Flat key-value form for CSV reports."""
        out = {f"x{i + 1}": float(v) for i, v in enumerate(self.point)}
        out.update(grad_norm=self.grad_norm, lambda_min=self.lambda_min,
                   passed=int(self.passed))
        m = self.minorant
        if m is not None:
            checks = m.checks()
            out.update(minorant_radius=m.neighborhood_radius, minorant_gap=m.minorant_gap,
                       minorant_ok=int(all(checks.values())),
                       minorant_hypothesis=int(m.hypothesis_ok))
        return out


def sample_ball_points(rng: np.random.Generator, center, radius: float, n: int) -> np.ndarray:
    center = np.asarray(center, dtype=float)
    d = center.size
    u = rng.standard_normal((n, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    return center + radius * u * rng.uniform(size=(n, 1)) ** (1.0 / d)


def quadratic_certificate(h: EnvelopeHandle, x, eps1: float, eps2: float,
                          n_samples: int = 1000, seed: int = 0) -> QuadraticCertificate:
    """Build the local quadratic minorant at ``prox(x)`` and sample the minorant property."""
    x = np.asarray(x, dtype=float)
    p = h.problem
    mu = h.mu
    xhat = _prox(h, x)
    g = (x - xhat) / mu
    f_xhat = float(p.objective.value(xhat))
    const = f_xhat - 0.5 * mu * (1.0 + 3.0 * mu * eps2) * eps1**2
    radius = 3.0 * eps2 / (4.0 * p.L2)
    ys = sample_ball_points(np.random.default_rng(seed), xhat, radius, n_samples)
    dy = ys - xhat
    qv = const + dy @ g - 1.5 * eps2 * np.sum(dy * dy, axis=1)
    gap = float(np.min(p.objective.value(ys) - qv))
    return QuadraticCertificate(
        x=x, xhat=xhat, constant=const, linear=g, curvature=3.0 * eps2,
        neighborhood_radius=radius, mu=mu, eps1=eps1, eps2=eps2, f_xhat=f_xhat,
        minorant_gap=gap, n_samples=n_samples,
        hypothesis_ok=bool(eps1 <= min(p.alpha, eps2 / (2.0 * p.L2 * mu))),
    )


def grad_and_curvature(h: EnvelopeHandle, x):
    """Batched ``(grad_norm, lambda_min, not_smooth)`` at points ``x``."""
    x = np.asarray(x, dtype=float)
    g = (x - _prox(h, x)) / h.mu
    H, asym, bound = fd_hessian_batch(h, x)
    lam = np.linalg.eigvalsh(H)[..., 0]
    return np.linalg.norm(g, axis=-1), lam, asym > bound


def check_second_order(h: EnvelopeHandle, x, eps1: float, eps2: float,
                       minorant: bool = True, n_samples: int = 1000,
                       seed: int = 0) -> CriticalityCertificate:
    """Test ``|grad f_mu(x)| <= eps1`` and ``lambda_min(hess f_mu(x)) >= -eps2``.

    On success a quadratic minorant certificate is attached; its
    ``hypothesis_ok`` flag records whether ``eps1 <= eps2 / (2 L2 mu)``.
    """
    if not (eps1 > 0 and eps2 > 0):
        raise ValueError("eps1 and eps2 must be positive")
    x = h.problem.check_domain(x)
    grad_norm = float(np.linalg.norm(exact_grad(h, x)))
    H, _ = fd_hessian(h, x)
    lam = float(np.linalg.eigvalsh(H)[0])
    passed = grad_norm <= eps1 and lam >= -eps2
    cert = None
    if passed and minorant:
        cert = quadratic_certificate(h, x, eps1, eps2, n_samples, seed)
    return CriticalityCertificate(point=np.array(x), grad_norm=grad_norm, lambda_min=lam,
                                  eps1=eps1, eps2=eps2, passed=passed, minorant=cert)
