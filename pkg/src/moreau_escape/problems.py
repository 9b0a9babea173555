"""Corpus of weakly convex test problems.

Each problem carries its full objective as a :class:`KinkedQuartic` (used
by the ground-truth proximal solver) together with three structural
splittings, one per model family:

* ``ADDITIVE``     f = l + r,      l convex Lipschitz, r weakly convex
* ``SMOOTH_PLUS``  f = F + r,      F with q-Lipschitz gradient
* ``COMPOSITE``    f = h(c(.)) + r, h convex, c smooth

``evaluate`` sums the ADDITIVE parts, so it is bit-identical to ``l(x) +
r(x)``; the whole objective agrees with every splitting to rounding.
"""
from __future__ import annotations

import enum
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

from .errors import MuTooLarge, NoConvergence, OutOfDomain
from .functions import KinkedQuartic, SmoothMap


class Form(enum.Enum):
    ADDITIVE = "additive"
    SMOOTH_PLUS = "smooth_plus"
    COMPOSITE = "composite"


@dataclass(frozen=True)
class Additive:
    l: KinkedQuartic
    r: KinkedQuartic
    lip_l: float  # Lipschitz constant of l on the domain box
    form = Form.ADDITIVE


@dataclass(frozen=True)
class SmoothPlus:
    F: KinkedQuartic
    r: KinkedQuartic
    q: float  # Lipschitz constant of grad F on the domain box
    form = Form.SMOOTH_PLUS


@dataclass(frozen=True)
class Composite:
    h: KinkedQuartic
    c: SmoothMap
    r: KinkedQuartic
    q: float  # two-sided accuracy of the linearized model on the box
    form = Form.COMPOSITE


@dataclass(frozen=True)
class Box:
    lo: np.ndarray
    hi: np.ndarray

    @classmethod
    def cube(cls, dim: int, half_width: float) -> "Box":
        return cls(np.full(dim, -float(half_width)), np.full(dim, float(half_width)))

    def contains(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return np.all((x >= self.lo) & (x <= self.hi), axis=-1)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lo, self.hi, size=(n, self.lo.size))


@dataclass(frozen=True, eq=False)
class ProblemSpec:
    """A weakly convex objective with its splittings and declared constants.

    ``L2``, ``alpha`` and ``beta`` describe the local C^2 structure of the
    Moreau envelope near its critical points; they are declared, not
    derived (see ``scripts/estimate_l2.py`` for the sampling estimate).
    """

    name: str
    dim: int
    rho: float
    objective: KinkedQuartic = field(repr=False)
    decompositions: Dict[Form, object] = field(repr=False)
    domain_box: Box = field(repr=False)
    lip_f: Optional[float] = None
    mu: float = 0.5
    L2: float = 1.0
    alpha: float = 0.1
    beta: float = 0.25
    minimizers: tuple = ()
    saddles: tuple = ()

    def decomposition(self, form: Form):
        return self.decompositions[form]

    def check_domain(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape[-1] != self.dim:
            raise OutOfDomain(f"expected trailing dimension {self.dim}, got {x.shape}")
        if not np.all(np.isfinite(x)):
            raise OutOfDomain("non-finite point")
        if not np.all(self.domain_box.contains(x)):
            raise OutOfDomain(f"point outside the domain box of {self.name}")
        return x


@dataclass(frozen=True)
class ProxGroundTruth:
    point: np.ndarray
    residual: np.ndarray
    tol: float


def evaluate(problem: ProblemSpec, x) -> np.ndarray:
    """Objective value, computed as ``l(x) + r(x)`` from the additive split."""
    x = problem.check_domain(x)
    parts = problem.decompositions[Form.ADDITIVE]
    return parts.l.value(x) + parts.r.value(x)


def subgrad(problem: ProblemSpec, x) -> np.ndarray:
    """Minimal-norm subgradient."""
    x = problem.check_domain(x)
    return problem.objective.subgrad(x)


def exact_prox(problem: ProblemSpec, x0, mu: float, tol: float = 1e-12) -> ProxGroundTruth:
    """Ground-truth ``prox_{mu f}(x0)``.

    Separable objectives are solved coordinatewise in closed form (soft
    threshold plus a Cardano root); coupled ones by accelerated proximal
    gradient to residual ``tol``.
    """
    if mu <= 0:
        raise ValueError("mu must be positive")
    if mu * problem.rho >= 1.0:
        raise MuTooLarge(f"mu={mu} violates mu*rho < 1 for rho={problem.rho}")
    x0 = np.asarray(x0, dtype=float)
    point, res = problem.objective.prox(x0, mu, tol=0.1 * tol)
    # absolute residual floor from rounding of the gradient terms
    scale = 1.0 + np.max(np.abs(x0), axis=-1) / mu
    if np.any(res > tol * scale):
        raise NoConvergence(f"ground-truth prox residual {np.max(res):.3e} exceeds {tol:.1e}")
    return ProxGroundTruth(point=point, residual=res, tol=tol)


# -- corpus -----------------------------------------------------------------

def _abs_quartic(half_width: float = 12.0) -> ProblemSpec:
    # f(x, y) = |x| + (y^2 - 1)^2 / 4
    B = half_width
    quartic = dict(w4=[0.0, 1.0], w2=[0.0, -1.0], const=0.25)
    f = KinkedQuartic(2, s_pos=[1, 0], s_neg=[1, 0], **quartic)
    additive = Additive(
        l=KinkedQuartic(2, s_pos=[1, 0], s_neg=[1, 0]),
        r=KinkedQuartic(2, **quartic),
        lip_l=1.0,
    )
    # F carries half of the concave curvature so that q = 1/2
    smooth = SmoothPlus(
        F=KinkedQuartic(2, w2=[0.0, -0.5], const=0.25),
        r=KinkedQuartic(2, s_pos=[1, 0], s_neg=[1, 0], w4=[0, 1], w2=[0, -0.5]),
        q=0.5,
    )
    # h(z) = |z1| + z2^2, c(x, y) = (x, (y^2 - 1) / 2)
    c = SmoothMap(
        2, 2,
        value=lambda x: np.stack([x[..., 0], 0.5 * (x[..., 1] ** 2 - 1.0)], axis=-1),
        jacobian=lambda x: _diag_jacobian(np.ones_like(x[..., 0]), x[..., 1]),
    )
    composite = Composite(
        h=KinkedQuartic(2, s_pos=[1, 0], s_neg=[1, 0], w2=[0, 2]),
        c=c,
        r=KinkedQuartic(2),
        q=1.0 + 2.0 * B * B,
    )
    return ProblemSpec(
        name="abs_quartic", dim=2, rho=1.0, objective=f,
        decompositions={Form.ADDITIVE: additive, Form.SMOOTH_PLUS: smooth,
                        Form.COMPOSITE: composite},
        domain_box=Box.cube(2, B), lip_f=1.0 + B * abs(B * B - 1.0),
        mu=0.5, L2=14.4, alpha=0.1, beta=0.25,
        minimizers=((0.0, 1.0), (0.0, -1.0)), saddles=((0.0, 0.0),),
    )


def _diag_jacobian(d1, d2):
    J = np.zeros(np.shape(d1) + (2, 2))
    J[..., 0, 0] = d1
    J[..., 1, 1] = d2
    return J


def _smooth_saddle(curvature: float = -0.08, half_width: float = 5.0) -> ProblemSpec:
    # f(x) = x^T A x / 2 with A = diag(1, curvature)
    lam = np.array([1.0, curvature])
    rho = max(0.0, -curvature)
    f = KinkedQuartic(2, w2=lam)
    additive = Additive(
        l=KinkedQuartic(2, w2=[1.0, 0.0]),
        r=KinkedQuartic(2, w2=[0.0, curvature]),
        lip_l=half_width,
    )
    smooth = SmoothPlus(F=KinkedQuartic(2, w2=lam), r=KinkedQuartic(2),
                        q=float(np.max(np.abs(lam))))
    c = SmoothMap(
        2, 1,
        value=lambda x: x[..., :1].copy(),
        jacobian=lambda x: np.broadcast_to(np.array([[1.0, 0.0]]), x.shape[:-1] + (1, 2)).copy(),
    )
    composite = Composite(h=KinkedQuartic(1, w2=1.0), c=c,
                          r=KinkedQuartic(2, w2=[0.0, curvature]), q=0.0)
    return ProblemSpec(
        name="smooth_saddle", dim=2, rho=rho, objective=f,
        decompositions={Form.ADDITIVE: additive, Form.SMOOTH_PLUS: smooth,
                        Form.COMPOSITE: composite},
        domain_box=Box.cube(2, half_width), lip_f=half_width * float(np.max(np.abs(lam))),
        mu=0.5, L2=1.0, alpha=1.0, beta=1.0,
        minimizers=(), saddles=((0.0, 0.0),),
    )


def path_laplacian(dim: int) -> np.ndarray:
    """``D^T D`` for the forward-difference operator on a path."""
    D = np.diff(np.eye(dim), axis=0)
    return D.T @ D


def _sep_piecewise(dim: int = 4, coupling: float = 0.1, half_width: float = 2.0) -> ProblemSpec:
    # f(x) = sum max(x_i, -x_i/2) + sum (x_i^2 - 1)^2 / 4 + coupling/2 |Dx|^2
    d = int(dim)
    B = half_width
    Q = coupling * path_laplacian(d) if d > 1 else None
    kinks = dict(s_pos=1.0, s_neg=0.5)
    f = KinkedQuartic(d, w4=1.0, w2=-1.0, Q=Q, const=0.25 * d, **kinks)
    lam_max_Q = 4.0 * coupling if d > 1 else 0.0
    additive = Additive(
        l=KinkedQuartic(d, Q=Q, **kinks),
        r=KinkedQuartic(d, w4=1.0, w2=-1.0, const=0.25 * d),
        lip_l=float(np.sqrt(d) * (1.0 + lam_max_Q * B)),
    )
    smooth = SmoothPlus(
        F=KinkedQuartic(d, w2=-0.5, Q=Q, const=0.25 * d),
        r=KinkedQuartic(d, w4=1.0, w2=-0.5, **kinks),
        q=0.5,
    )
    Qm = np.zeros((d, d)) if Q is None else Q

    def c_value(x):
        quartic = 0.25 * np.sum((x * x - 1.0) ** 2, axis=-1)
        coup = 0.5 * np.einsum("...i,ij,...j->...", x, Qm, x)
        return np.concatenate([x, (quartic + coup)[..., None]], axis=-1)

    def c_jacobian(x):
        J = np.zeros(x.shape[:-1] + (d + 1, d))
        J[..., np.arange(d), np.arange(d)] = 1.0
        J[..., d, :] = x**3 - x + x @ Qm
        return J

    composite = Composite(
        h=KinkedQuartic(d + 1, s_pos=[1.0] * d + [0.0], s_neg=[0.5] * d + [0.0],
                        w1=[0.0] * d + [1.0]),
        c=SmoothMap(d, d + 1, c_value, c_jacobian),
        r=KinkedQuartic(d),
        q=3.0 * B * B - 1.0 + lam_max_Q,
    )
    lip_f = float(np.sqrt(d) * (1.0 + B * abs(B * B - 1.0) + lam_max_Q * B))
    return ProblemSpec(
        name="sep_piecewise", dim=d, rho=1.0, objective=f,
        decompositions={Form.ADDITIVE: additive, Form.SMOOTH_PLUS: smooth,
                        Form.COMPOSITE: composite},
        domain_box=Box.cube(d, B), lip_f=lip_f,
        mu=0.5, L2=1.0, alpha=0.1, beta=0.2,
        minimizers=(tuple([0.0] * d),), saddles=(),
    )


PROBLEMS: Dict[str, Callable[..., ProblemSpec]] = {
    "abs_quartic": _abs_quartic,
    "smooth_saddle": _smooth_saddle,
    "sep_piecewise": _sep_piecewise,
}


def get_problem(name: str, **kwargs) -> ProblemSpec:
    try:
        factory = PROBLEMS[name]
    except KeyError:
        raise KeyError(f"unknown problem {name!r}; choose from {sorted(PROBLEMS)}") from None
    return factory(**kwargs)
