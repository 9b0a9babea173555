"""Separable kinked quartics with an optional quadratic coupling.

Every objective in the problem corpus, and every piece of every structural
decomposition, belongs to the family

    phi(x) = sum_i [ s_pos_i * max(x_i, 0) + s_neg_i * max(-x_i, 0)
                     + w4_i * x_i**4 / 4 + w2_i * x_i**2 / 2 + w1_i * x_i ]
             + x^T Q x / 2 + const

with ``s_pos, s_neg, w4 >= 0``.  The family is closed under adding
quadratics, its minimal-norm subgradient is computable coordinatewise, and
when ``Q`` is diagonal its proximal map reduces to one monotone cubic per
coordinate, solved in closed form and polished by Newton.  Non-diagonal
couplings fall back to accelerated proximal gradient.

All evaluation routines broadcast over leading axes: ``x`` has shape
``(..., d)``.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from functools import cached_property
from typing import Callable

import numpy as np

from .errors import NoConvergence, NotStronglyConvex


def _vec(value, dim: int) -> np.ndarray:
    out = np.broadcast_to(np.asarray(value, dtype=float), (dim,)).copy()
    out.setflags(write=False)
    return out


def solve_monotone_cubic(a, b, rhs) -> np.ndarray:
    """Real root of ``a*u**3 + b*u = rhs`` with ``a >= 0`` and ``b > 0``.

    Cardano's formula in a cancellation-free arrangement, followed by two
    Newton corrections.  The left side is strictly increasing, so the root is
    unique and has the sign of ``rhs``.  Where ``a == 0`` the first Newton
    step lands exactly on ``rhs / b``.
    """
    a = np.asarray(a, dtype=float)
    with np.errstate(over="ignore"):  # subnormal a: the linear start takes over
        inv_a = 1.0 / np.where(a > 0, a, 1.0)
    return _cubic_root(a, inv_a, np.asarray(b, dtype=float), np.asarray(rhs, dtype=float))


def _cubic_root(a, inv_a, b, rhs):
    c = np.abs(rhs)
    u_lin = c / b
    with np.errstate(over="ignore", invalid="ignore"):
        p3 = b * inv_a * (1.0 / 3.0)
        q2 = 0.5 * c * inv_a
        w2 = np.cbrt(q2 + np.sqrt(q2 * q2 + p3 * p3 * p3)) ** 2
        denom = w2 * (w2 + p3) + p3 * p3
        u_card = 2.0 * q2 * w2 / denom
    # when the cubic term is negligible at the linear root, start from that root
    u = np.where(a * u_lin * u_lin <= 1e-8 * b, u_lin, u_card)
    for _ in range(2):
        u2 = u * u
        u = u - (u * (a * u2 + b) - c) / (3.0 * a * u2 + b)
    return np.copysign(u, rhs)


@dataclass(frozen=True, eq=False)
class KinkedQuartic:
    """Member of the separable kinked-quartic family (see module docstring)."""

    dim: int
    s_pos: np.ndarray = 0.0
    s_neg: np.ndarray = 0.0
    w4: np.ndarray = 0.0
    w2: np.ndarray = 0.0
    w1: np.ndarray = 0.0
    Q: np.ndarray | None = None
    const: float = 0.0

    def __post_init__(self):
        d = int(self.dim)
        for name in ("s_pos", "s_neg", "w4", "w2", "w1"):
            object.__setattr__(self, name, _vec(getattr(self, name), d))
        if np.any(self.s_pos < 0) or np.any(self.s_neg < 0) or np.any(self.w4 < 0):
            raise ValueError("kink slopes and quartic weights must be nonnegative")
        if self.Q is not None:
            Q = np.array(self.Q, dtype=float)
            if Q.shape != (d, d) or not np.allclose(Q, Q.T, rtol=0, atol=0):
                raise ValueError("coupling Q must be a symmetric (d, d) matrix")
            if not np.any(Q - np.diag(np.diag(Q))):
                # purely diagonal couplings are folded into w2
                object.__setattr__(self, "w2", _vec(self.w2 + np.diag(Q), d))
                Q = None
            else:
                Q.setflags(write=False)
            object.__setattr__(self, "Q", Q)
        object.__setattr__(self, "const", float(self.const))

    # -- structure -------------------------------------------------------
    @property
    def separable(self) -> bool:
        return self.Q is None

    @property
    def smooth(self) -> bool:
        return not (np.any(self.s_pos) or np.any(self.s_neg))

    @property
    def kinked(self) -> np.ndarray:
        return (self.s_pos > 0) | (self.s_neg > 0)

    def weak_convexity(self) -> float:
        return self._weak_convexity

    @cached_property
    def _weak_convexity(self) -> float:
        """Smallest rho with ``phi + rho/2 |x|^2`` convex (0 if convex).

        Quartic and kink terms are convex, so only the quadratic part matters.
        """
        H = np.diag(self.w2)
        if self.Q is not None:
            H = H + self.Q
        eig = np.linalg.eigvalsh(H)
        # eigenvalues at rounding level of zero count as zero
        floor = 1e-12 * max(1.0, float(np.max(np.abs(eig))))
        return max(0.0, -float(eig[0])) if eig[0] < -floor else 0.0

    def replace(self, **changes) -> "KinkedQuartic":
        fields = dict(dim=self.dim, s_pos=self.s_pos, s_neg=self.s_neg, w4=self.w4,
                      w2=self.w2, w1=self.w1, Q=self.Q, const=self.const)
        fields.update(changes)
        return KinkedQuartic(**fields)

    def add_quadratic(self, w2=0.0, w1=0.0, const=0.0) -> "KinkedQuartic":
        """Return ``phi + sum_i (w2_i x_i^2 / 2 + w1_i x_i) + const``."""
        return self.replace(w2=self.w2 + w2, w1=self.w1 + w1, const=self.const + const)

    # -- evaluation ------------------------------------------------------
    def value(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        x2 = x * x
        terms = (self.s_pos * np.maximum(x, 0.0) + self.s_neg * np.maximum(-x, 0.0)
                 + (0.25 * self.w4 * x2 + 0.5 * self.w2) * x2 + self.w1 * x)
        out = terms.sum(axis=-1) + self.const
        if self.Q is not None:
            out = out + 0.5 * np.einsum("...i,ij,...j->...", x, self.Q, x)
        return out

    def smooth_grad(self, x) -> np.ndarray:
        """Gradient of every term except the kinks."""
        x = np.asarray(x, dtype=float)
        g = (self.w4 * (x * x) + self.w2) * x + self.w1
        if self.Q is not None:
            g = g + np.einsum("...j,ij->...i", x, self.Q)
        return g

    def grad(self, x) -> np.ndarray:
        if not self.smooth:
            raise ValueError("function has kinks; use subgrad")
        return self.smooth_grad(x)

    def subgrad(self, x) -> np.ndarray:
        """Minimal-norm element of the subdifferential.

        The subdifferential is the smooth gradient plus a box, one interval
        per coordinate, so the minimal-norm element is found coordinatewise.
        """
        x = np.asarray(x, dtype=float)
        return self._min_norm(self.smooth_grad(x), x)

    def _min_norm(self, g: np.ndarray, x: np.ndarray) -> np.ndarray:
        # coordinates without kinks have a zero box, so the clip is a no-op there
        lo = -self.s_neg
        return g + np.where(x > 0, self.s_pos, np.where(x < 0, lo, np.clip(-g, lo, self.s_pos)))

    # -- proximal map ----------------------------------------------------
    def prox_point(self, v, lam: float, tol: float = 1e-12) -> np.ndarray:
        """Like :meth:`prox` but returns only the point."""
        if self.separable and 1.0 / lam > self.weak_convexity():
            return self._prox_separable(np.asarray(v, dtype=float), float(lam))
        return self.prox(v, lam, tol)[0]

    def prox(self, v, lam: float, tol: float = 1e-12, max_iter: int = 100_000):
        """``argmin_y phi(y) + |y - v|^2 / (2 lam)`` and its optimality residual.

        Returns ``(point, residual)`` where ``residual`` bounds the distance
        from zero to the subdifferential of the prox objective at ``point``
        (per row when ``v`` is batched).
        """
        v = np.asarray(v, dtype=float)
        lam = float(lam)
        if lam <= 0:
            raise ValueError("prox parameter must be positive")
        if 1.0 / lam <= self.weak_convexity():
            raise NotStronglyConvex(
                f"prox parameter {lam} too large for weak convexity {self.weak_convexity()}")
        if self.separable:
            y = self._prox_separable(v, lam)
            return y, self.prox_residual(y, v, lam)
        return self._prox_coupled(v, lam, tol, max_iter)

    @cached_property
    def _inv_w4(self) -> np.ndarray:
        with np.errstate(over="ignore"):  # subnormal weights: the linear start takes over
            return 1.0 / np.where(self.w4 > 0, self.w4, 1.0)

    @cached_property
    def _has_quartic(self) -> bool:
        return bool(np.any(self.w4 > 0))

    def _prox_separable(self, v: np.ndarray, lam) -> np.ndarray:
        inv_lam = 1.0 / lam
        b = self.w2 + inv_lam
        if np.any(b <= 0):
            raise NotStronglyConvex("coordinate subproblem is not strongly convex")
        c = v * inv_lam - self.w1
        # generalized soft threshold, then one monotone cubic per coordinate
        rhs = c - np.clip(c, -self.s_neg, self.s_pos)
        if not self._has_quartic:
            return rhs / b
        return _cubic_root(self.w4, self._inv_w4, b, rhs)

    def _prox_coupled(self, v: np.ndarray, lam: float, tol: float, max_iter: int):
        # Split the coupling so the smooth part is convex: Q = (Q - sigma I) + sigma I,
        # with sigma I absorbed into the separable part.
        sigma = float(np.linalg.eigvalsh(self.Q)[0])
        Qs = self.Q - sigma * np.eye(self.dim)
        sep = self.replace(Q=None, w2=self.w2 + sigma)
        L = float(np.linalg.eigvalsh(Qs)[-1]) + 1.0 / lam
        t = 1.0 / L
        if np.any(sep.w2 + L <= 0):
            raise NotStronglyConvex("coupled prox split is not strongly convex")

        def smooth_grad(y):
            return y @ Qs + (y - v) / lam

        y = v.copy()
        z = y.copy()
        mom = np.ones(v.shape[:-1] + (1,))
        res = np.full(v.shape[:-1], np.inf)
        for _ in range(max_iter):
            y_new = sep._prox_separable(z - t * smooth_grad(z), t)
            gmap = (z - y_new) / t
            # (1 + L t) |G_t| bounds dist(0, subdifferential) at y_new
            res = 2.0 * np.linalg.norm(gmap, axis=-1)
            if np.all(res <= tol):
                y = y_new
                break
            restart = np.sum((z - y_new) * (y_new - y), axis=-1, keepdims=True) > 0
            mom_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * mom * mom))
            beta = np.where(restart, 0.0, (mom - 1.0) / mom_new)
            z = y_new + beta * (y_new - y)
            mom = np.where(restart, 1.0, mom_new)
            y = y_new
        else:
            raise NoConvergence(f"coupled prox residual {np.max(res):.3e} > {tol:.1e}")
        return y, self.prox_residual(y, v, lam)

    def prox_residual(self, y, v, lam: float) -> np.ndarray:
        """Norm of the minimal-norm subgradient of ``phi + |. - v|^2/(2 lam)`` at ``y``."""
        y = np.asarray(y, dtype=float)
        g = self._min_norm(self.smooth_grad(y) + (y - np.asarray(v)) / lam, y)
        return np.linalg.norm(g, axis=-1)


@dataclass(frozen=True, eq=False)
class SmoothMap:
    """A C^1 map ``c: R^d -> R^m`` given by its value and Jacobian."""

    in_dim: int
    out_dim: int
    value: Callable[[np.ndarray], np.ndarray] = field(repr=False)
    jacobian: Callable[[np.ndarray], np.ndarray] = field(repr=False)
