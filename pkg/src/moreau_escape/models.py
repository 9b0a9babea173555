"""Local models of a weakly convex objective and the proximal step on them.

Three families, one per structural splitting:

=============  ============  =====================================
kind           splitting     model ``f_z(y)``
=============  ============  =====================================
subgradient    l + r         l(z) + <v_z, y - z> + r(y)
prox-gradient  F + r         F(z) + <grad F(z), y - z> + r(y)
prox-linear    h(c) + r      h(c(z) + grad c(z)(y - z)) + r(y)
=============  ============  =====================================

``prox_step`` minimizes ``f_{x_k}(x) + |x - x0|^2/(2 mu) + theta/2 |x - x_k|^2``.
All routines broadcast over leading axes.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy.optimize import lsq_linear

from .errors import DecompositionMismatch, NoConvergence, NotStronglyConvex
from .functions import KinkedQuartic
from .problems import Form, ProblemSpec


class ModelKind(enum.Enum):
    SUBGRADIENT = "subgradient"
    PROX_GRADIENT = "prox-gradient"
    PROX_LINEAR = "prox-linear"


FORM_OF = {
    ModelKind.SUBGRADIENT: Form.ADDITIVE,
    ModelKind.PROX_GRADIENT: Form.SMOOTH_PLUS,
    ModelKind.PROX_LINEAR: Form.COMPOSITE,
}


@dataclass(frozen=True)
class OneSided:
    """``f_x(y) - f(y) <= tau |y - x|^2``; ``L`` bounds the model slopes."""

    tau: float
    L: float


@dataclass(frozen=True)
class TwoSided:
    """``|f_x(y) - f(y)| <= q/2 |y - x|^2``."""

    q: float


@dataclass(frozen=True)
class ModelOracle:
    kind: ModelKind
    accuracy: Union[OneSided, TwoSided]
    rho_model: float

    @property
    def one_sided(self) -> bool:
        return isinstance(self.accuracy, OneSided)


def _parts(problem: ProblemSpec, kind: ModelKind):
    form = FORM_OF[kind]
    try:
        return problem.decompositions[form]
    except KeyError:
        raise DecompositionMismatch(
            f"{problem.name} has no {form.value} splitting for a {kind.value} model") from None


def make_model(problem: ProblemSpec, kind: Union[ModelKind, str]) -> ModelOracle:
    kind = ModelKind(kind)
    parts = _parts(problem, kind)
    if kind is ModelKind.SUBGRADIENT:
        acc = OneSided(tau=parts.l.weak_convexity(), L=parts.lip_l)
    else:
        acc = TwoSided(q=parts.q)
    return ModelOracle(kind=kind, accuracy=acc, rho_model=parts.r.weak_convexity())


def model_value(model: ModelOracle, problem: ProblemSpec, center, y) -> np.ndarray:
    """Evaluate ``f_center(y)``."""
    z = problem.check_domain(center)
    y = problem.check_domain(y)
    parts = _parts(problem, model.kind)
    if model.kind is ModelKind.SUBGRADIENT:
        v = parts.l.subgrad(z)
        return parts.l.value(z) + np.sum(v * (y - z), axis=-1) + parts.r.value(y)
    if model.kind is ModelKind.PROX_GRADIENT:
        v = parts.F.smooth_grad(z)
        return parts.F.value(z) + np.sum(v * (y - z), axis=-1) + parts.r.value(y)
    lin = parts.c.value(z) + np.einsum("...md,...d->...m", parts.c.jacobian(z), y - z)
    return parts.h.value(lin) + parts.r.value(y)


def _check_strong_convexity(model: ModelOracle, theta: float, mu: float) -> None:
    if theta < 0 or mu <= 0:
        raise NotStronglyConvex("need theta >= 0 and mu > 0")
    if 1.0 / mu + theta <= model.rho_model:
        raise NotStronglyConvex(
            f"1/mu + theta = {1.0 / mu + theta:.6g} does not exceed the model modulus "
            f"{model.rho_model:.6g}")


def prox_step(model: ModelOracle, problem: ProblemSpec, x0, xk, theta: float, mu: float,
              tol: float = 1e-12) -> np.ndarray:
    """One model-based proximal step, in re-centered form.

    For the linear models the step is a single proximal map of ``r`` at
    ``(x0 + theta mu xk - mu v) / (1 + theta mu)`` with parameter
    ``mu / (1 + theta mu)``.  The prox-linear step solves its convex
    subproblem by accelerated dual ascent.
    """
    _check_strong_convexity(model, theta, mu)
    x0 = np.asarray(x0, dtype=float)
    xk = np.asarray(xk, dtype=float)
    parts = _parts(problem, model.kind)
    s = 1.0 + theta * mu
    if model.kind is ModelKind.PROX_LINEAR:
        A = parts.c.jacobian(xk)
        b = parts.c.value(xk) - np.einsum("...md,...d->...m", A, xk)
        kappa = 1.0 / mu + theta
        ref = (x0 + theta * mu * xk) / s
        y, _ = solve_prox_linear(parts.h, parts.r, A, b, ref, kappa, tol=tol)
        return y
    if model.kind is ModelKind.SUBGRADIENT:
        v = parts.l.subgrad(xk)
    else:
        v = parts.F.smooth_grad(xk)
    ref = (x0 + theta * mu * xk - mu * v) / s
    return parts.r.prox_point(ref, mu / s, tol=tol)


def prox_step_direct(model: ModelOracle, problem: ProblemSpec, x0, xk, theta: float,
                     mu: float, tol: float = 1e-12) -> np.ndarray:
    """Unbatched prox step solved without re-centering.

    The linear and proximal terms are folded into the nonsmooth part and
    the step becomes a plain proximal map at ``x0`` with parameter ``mu``.
    Used to cross-check :func:`prox_step`.
    """
    _check_strong_convexity(model, theta, mu)
    x0 = np.asarray(x0, dtype=float)
    xk = np.asarray(xk, dtype=float)
    parts = _parts(problem, model.kind)
    if model.kind is ModelKind.PROX_LINEAR:
        A = parts.c.jacobian(xk)
        b = parts.c.value(xk) - A @ xk
        r = parts.r.add_quadratic(w2=theta, w1=-theta * xk)
        y, _ = solve_prox_linear(parts.h, r, A[None], b[None], x0[None], 1.0 / mu, tol=tol)
        return y[0]
    if model.kind is ModelKind.SUBGRADIENT:
        v = parts.l.subgrad(xk)
    else:
        v = parts.F.smooth_grad(xk)
    folded = parts.r.add_quadratic(w2=theta, w1=v - theta * xk)
    y, _ = folded.prox(x0, mu, tol=tol)
    return y


def solve_prox_linear(h: KinkedQuartic, r: KinkedQuartic, A, b, ref, kappa: float,
                      tol: float = 1e-12, max_iter: int = 100_000):
    """Minimize ``h(A y + b) + r(y) + kappa/2 |y - ref|^2`` over ``y``.

    ``h`` must be convex and separable, ``kappa`` must exceed the weak
    convexity of ``r``.  Works on the dual, where ``y(lam)`` is one proximal
    map of ``r`` and the dual step is one proximal map of ``h``; FISTA with
    adaptive restart, per-row step sizes.  Returns ``(y, residual)`` where
    ``residual`` is the first-order optimality residual at ``y``.
    """
    if not h.separable or h.weak_convexity() > 0:
        raise ValueError("outer function must be convex and separable")
    sc = kappa - r.weak_convexity()
    if sc <= 0:
        raise NotStronglyConvex("prox-linear subproblem is not strongly convex")
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    ref = np.asarray(ref, dtype=float)
    lead = ref.shape[:-1]
    A = np.broadcast_to(A, lead + A.shape[-2:]).reshape(-1, *A.shape[-2:])
    b = np.broadcast_to(b, lead + b.shape[-1:]).reshape(-1, b.shape[-1])
    ref = ref.reshape(-1, ref.shape[-1])
    n, m, _ = A.shape

    normA = np.linalg.norm(A, ord=2, axis=(-2, -1))
    t = (sc / np.maximum(normA**2, 1e-300))[:, None]
    inv_t = 1.0 / t

    def primal(lam_):
        return r.prox_point(ref - np.einsum("nmd,nm->nd", A, lam_) / kappa, 1.0 / kappa)

    def dual_step(w_):
        u = w_ + t * (np.einsum("nmd,nd->nm", A, primal(w_)) + b)
        return u - t * h._prox_separable(u * inv_t, inv_t)

    def kkt(lam_):
        # -A^T lam lies in the subdifferential of r + kappa/2|.-ref|^2 at y(lam),
        # so the residual is the distance from A^T lam to A^T dh(Ay + b)
        y_ = primal(lam_)
        z = np.einsum("nmd,nd->nm", A, y_) + b
        g = h.smooth_grad(z)
        ztol = 1e-13 * (1.0 + np.abs(z))
        free = np.clip(lam_ - g, -h.s_neg, h.s_pos)
        slope = np.where(z > ztol, h.s_pos, np.where(z < -ztol, -h.s_neg, free))
        return np.linalg.norm(np.einsum("nmd,nm->nd", A, g + slope - lam_), axis=-1)

    lam = np.zeros((n, m))
    w = lam.copy()
    mom = np.ones((n, 1))
    scale = 1.0 + np.abs(ref).max(axis=-1) * kappa + normA
    res = np.full(n, np.inf)
    for it in range(max_iter):
        lam_new = dual_step(w)
        if it % 5 == 4 or it == 0:
            res = kkt(lam_new)
            if np.all(res <= tol * scale):
                lam = lam_new
                break
        restart = np.sum((w - lam_new) * (lam_new - lam), axis=-1, keepdims=True) > 0
        mom_new = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * mom * mom))
        beta = np.where(restart, 0.0, (mom - 1.0) / mom_new)
        w = lam_new + beta * (lam_new - lam)
        mom = np.where(restart, 1.0, mom_new)
        lam = lam_new
    else:
        raise NoConvergence(f"prox-linear residual {np.max(res):.3e} above tolerance")
    y = primal(lam)
    return y.reshape(lead + (y.shape[-1],)), res.reshape(lead)


def subproblem_residual(model: ModelOracle, problem: ProblemSpec, x0, xk, theta: float,
                        mu: float, y, kink_tol: float = 1e-10) -> float:
    """Distance from zero to the subdifferential of the prox-step objective at ``y``.

    Kinks of ``h`` and ``r`` closer than ``kink_tol`` count as active; the
    free subgradient components are chosen by bounded least squares.
    """
    x0, xk, y = (np.asarray(v, dtype=float) for v in (x0, xk, y))
    parts = _parts(problem, model.kind)
    d = y.size
    if model.kind is ModelKind.PROX_LINEAR:
        A = parts.c.jacobian(xk)
        outer, inner = parts.h, A @ (y - xk) + parts.c.value(xk)
    else:
        v = parts.l.subgrad(xk) if model.kind is ModelKind.SUBGRADIENT else parts.F.smooth_grad(xk)
        A, outer, inner = None, None, None
    r = parts.r
    fixed = r.smooth_grad(y) + (y - x0) / mu + theta * (y - xk)
    cols, lo, hi = [], [], []
    # kinks of r: coordinate boxes, otherwise the one-sided slope
    r_active = r.kinked & (np.abs(y) <= kink_tol)
    fixed = fixed + np.where(r_active, 0.0, np.where(y > 0, r.s_pos, -r.s_neg) * r.kinked)
    for i in np.flatnonzero(r_active):
        cols.append(np.eye(d)[i])
        lo.append(-r.s_neg[i])
        hi.append(r.s_pos[i])
    if A is None:
        fixed = fixed + v
    else:
        grad_h = outer.smooth_grad(inner)
        active = outer.kinked & (np.abs(inner) <= kink_tol)
        slope = np.where(active, 0.0, np.where(inner > 0, outer.s_pos, -outer.s_neg) * outer.kinked)
        fixed = fixed + A.T @ (grad_h + slope)
        for i in np.flatnonzero(active):
            cols.append(A[i])
            lo.append(-outer.s_neg[i])
            hi.append(outer.s_pos[i])
    if not cols:
        return float(np.linalg.norm(fixed))
    C = np.array(cols).T
    sol = lsq_linear(C, -fixed, bounds=(np.array(lo), np.array(hi)), tol=1e-15)
    return float(np.linalg.norm(C @ sol.x + fixed))
