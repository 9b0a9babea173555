"""Perturbed inexact gradient descent.

The loop takes a step along ``-(G(x_t) + u_t)``, where ``u_t`` is drawn
uniformly from the ball of radius ``r`` whenever the oracle norm drops to
``eps1 / 2`` and at least ``M`` steps have passed since the last draw.  The
theory-mode schedule fixes every parameter from the target accuracies and
the smoothness constants.
"""
from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Optional, Sequence

import numpy as np

from .errors import EpsOutOfRange, InadmissibleAB, OracleFailure


class PgdMode(enum.Enum):
    THEORY = "theory"
    PRACTICAL = "practical"


@dataclass(frozen=True)
class PgdParams:
    eps1: float
    eps2: float
    delta: float
    L1: float
    L2: float
    Delta_g: float
    d: int
    a: float
    b: float
    phi: float
    gamma: float
    F_dec: float
    R_rad: float
    eta: float
    r_pert: float
    M: float
    T: int
    mode: PgdMode = PgdMode.THEORY

    def as_dict(self) -> dict:
        out = asdict(self)
        out["mode"] = self.mode.value
        return out


def _kappa(a: float) -> float:
    """``(1 + a)^2 / (1 - a)``, the inflation factor from relative error ``a``."""
    return (1.0 + a) ** 2 / (1.0 - a)


def phi_value(eps1, eps2, delta, L1, L2, Delta_g, d) -> float:
    return (2.0**24 * max(1.0, 5.0 * L2 * eps1 / (L1 * eps2)) * (L1**2 / delta) * math.sqrt(d)
            * (Delta_g * max(L2**2 / eps2**5, 1.0 / (eps1**2 * eps2)) + 1.0 / eps2**2))


def compute_params(eps1: float, eps2: float, delta: float, L1: float, L2: float,
                   Delta_g: float, d: int, a: float = 0.0, b: float = 0.0, *,
                   alpha: Optional[float] = None, beta: Optional[float] = None,
                   check: bool = True) -> PgdParams:
    """Theory-mode parameter bundle.

    Raises ``EpsOutOfRange`` when the accuracy targets violate the range
    conditions (the one involving ``gamma`` is checked after ``gamma`` is
    known) and, with ``check=True``, ``InadmissibleAB`` when ``(a, b)``
    exceed the admissible bounds.
    """
    for name, val in dict(eps1=eps1, eps2=eps2, delta=delta, L1=L1, L2=L2,
                          Delta_g=Delta_g, d=d).items():
        if not val > 0:
            raise ValueError(f"{name} must be positive, got {val}")
    if not 0 <= a < 1 or b < 0:
        raise InadmissibleAB(f"need 0 <= a < 1 and b >= 0, got a={a}, b={b}")
    phi = phi_value(eps1, eps2, delta, L1, L2, Delta_g, d)
    gamma = math.log2(phi * math.log2(phi) ** 8)
    c_a = (1.0 - a) / (1.0 + a) ** 2
    F_dec = c_a * eps2**3 / (800.0 * gamma**3 * L2**2)
    R_rad = eps2 / (4.0 * gamma * L2)
    eta = c_a / L1
    r_pert = eps2**2 / (400.0 * L2 * gamma**3) * min(1.0, L1 * eps2 / (5.0 * eps1 * L2))
    M = _kappa(a) * (L1 / eps2) * gamma
    T = math.ceil(8.0 * Delta_g * max(2.0 * M / F_dec, 256.0 / ((1.0 - a) * eta * eps1**2))
                  + 4.0 * M)
    params = PgdParams(eps1=eps1, eps2=eps2, delta=delta, L1=L1, L2=L2, Delta_g=Delta_g,
                       d=int(d), a=a, b=b, phi=phi, gamma=gamma, F_dec=F_dec, R_rad=R_rad,
                       eta=eta, r_pert=r_pert, M=M, T=T, mode=PgdMode.THEORY)
    if alpha is not None and not eps1 < alpha:
        raise EpsOutOfRange(f"eps1={eps1} must be below alpha={alpha}")
    bound = min(L1, L1**2) if beta is None else min(4.0 * gamma * beta * L2, L1, L1**2)
    if not eps2 < bound:
        raise EpsOutOfRange(f"eps2={eps2} must be below {bound}")
    if check:
        adm = ab_admissible(params)
        if not adm.ok:
            raise InadmissibleAB(f"(a, b) = ({a}, {b}) exceeds (a_max, b_max) = "
                                 f"({adm.a_max:.3e}, {adm.b_max:.3e})")
    return params


def practical_params(eta: float, r_pert: float, M: float, T: int, eps1: float, eps2: float,
                     *, L1: float = float("nan"), L2: float = float("nan"), a: float = 0.0,
                     b: float = 0.0, delta: float = float("nan"), d: int = 0) -> PgdParams:
    """User-chosen step, radius and horizon; auxiliary fields are left as NaN."""
    if not (eta > 0 and r_pert >= 0 and M >= 0 and T >= 0):
        raise ValueError("need eta > 0, r >= 0, M >= 0, T >= 0")
    nan = float("nan")
    return PgdParams(eps1=eps1, eps2=eps2, delta=delta, L1=L1, L2=L2, Delta_g=nan, d=d,
                     a=a, b=b, phi=nan, gamma=nan, F_dec=nan, R_rad=nan, eta=eta,
                     r_pert=r_pert, M=M, T=int(T), mode=PgdMode.PRACTICAL)


@dataclass(frozen=True)
class Admissibility:
    a_max: float
    b_max: float
    ok: bool


def ab_admissible(params: PgdParams) -> Admissibility:
    """Largest admissible ``a`` and ``b`` for the schedule, and whether the stored pair fits."""
    p = params
    if p.mode is not PgdMode.THEORY:
        raise ValueError("admissibility is defined for theory-mode parameters")
    scale = p.eta * p.M * 2.0 ** (p.gamma + 2.0)
    a_max = min(1.0 / 20.0, 1.0 / (p.L1 * scale), p.R_rad / (p.eps1 * scale))
    b_max = min(p.eps1 / 64.0,
                math.sqrt(p.F_dec / (40.0 * p.eta * p.M)),
                math.sqrt(p.L1 * p.F_dec / (p.M * (5.0 * p.L1 + 1.0))),
                p.R_rad / scale)
    return Admissibility(a_max=a_max, b_max=b_max, ok=bool(p.a <= a_max and p.b <= b_max))


@dataclass(frozen=True)
class ScheduleInequalities:
    radius_lhs: float
    radius_rhs: float
    value_lhs: float
    value_rhs: float
    prob: float
    delta: float

    @property
    def radius_ok(self) -> bool:
        return self.radius_lhs < self.radius_rhs

    @property
    def value_ok(self) -> bool:
        return self.value_lhs <= self.value_rhs

    @property
    def prob_ok(self) -> bool:
        return self.prob <= self.delta

    @property
    def ok(self) -> bool:
        return self.radius_ok and self.value_ok and self.prob_ok

    def slacks(self) -> dict:
        return {"radius": self.radius_rhs - self.radius_lhs,
                "value": self.value_rhs - self.value_lhs,
                "probability": self.delta - self.prob}


def verify_schedule_inequalities(params: PgdParams) -> ScheduleInequalities:
    """Evaluate the radius, function-value and probability inequalities of the schedule."""
    p = params
    k = _kappa(p.a)
    radius_lhs = math.sqrt(32.0 * p.eta * k * p.M * p.F_dec) + p.eta * p.r_pert
    value_lhs = p.eps1 * p.eta * p.r_pert + 0.5 * p.L1 * p.eta**2 * p.r_pert**2
    # evaluated in log space: 2^gamma overflows nothing here, but T * 2^-gamma can underflow
    log_prob = (math.log(p.T) + math.log(p.L1) + math.log(k) + 0.5 * math.log(p.d)
                - math.log(p.eps2) + 2.0 * math.log(p.gamma)
                + math.log(max(1.0, 5.0 * p.L2 * p.eps1 / (p.L1 * p.eps2)))
                + (9.0 - p.gamma) * math.log(2.0))
    return ScheduleInequalities(radius_lhs=radius_lhs, radius_rhs=p.R_rad, value_lhs=value_lhs,
                         value_rhs=0.5 * p.F_dec, prob=math.exp(log_prob), delta=p.delta)


def sample_ball(d: int, radius: float, rng: np.random.Generator) -> np.ndarray:
    """Uniform draw from the closed ``d``-ball of the given radius."""
    if radius < 0:
        raise ValueError("radius must be nonnegative")
    z = rng.standard_normal(d)
    u = rng.uniform()
    if radius == 0:
        return np.zeros(d)
    return z / np.linalg.norm(z) * (radius * u ** (1.0 / d))


@dataclass
class RunTrace:
    iterates: np.ndarray          # (T + 2, d): x_0 .. x_{T+1}
    G: np.ndarray                 # (T + 1, d): oracle outputs at x_0 .. x_T
    G_norm: np.ndarray            # (T + 1,)
    perturbations: np.ndarray     # (T + 1, d): u_t, zero when not drawn
    perturb_events: List[tuple]   # (t, u_t)
    seed: int
    envelope_values: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def perturbed(self) -> np.ndarray:
        out = np.zeros(self.G_norm.size, dtype=bool)
        for t, _ in self.perturb_events:
            out[t] = True
        return out


GradOracle = Callable[[np.ndarray], np.ndarray]


def run(G: GradOracle, x0, params: PgdParams, seed: int) -> RunTrace:
    """One run of the perturbed loop; ``G`` maps a point to an oracle output."""
    return run_many(lambda X: np.asarray(G(X[0]), dtype=float)[None], [x0], params, [seed])[0]


def run_many(G_batch: GradOracle, x0s, params: PgdParams, seeds: Sequence[int]) -> List[RunTrace]:
    """Independent runs advanced in lockstep through a batched oracle.

    ``G_batch`` maps an ``(n, d)`` array of points to ``(n, d)`` oracle
    outputs row by row.  Every run draws perturbations from its own
    generator, so each trace equals the trace of :func:`run` with the same
    start and seed.
    """
    X = np.array(np.broadcast_to(np.asarray(x0s, dtype=float),
                                 (len(seeds), np.shape(x0s)[-1])))
    n, d = X.shape
    T, M, eta = params.T, params.M, params.eta
    thresh = 0.5 * params.eps1
    rngs = [np.random.default_rng(s) for s in seeds]
    t_pert = np.full(n, -M, dtype=float)
    iterates = np.empty((T + 2, n, d))
    Gs = np.empty((T + 1, n, d))
    Us = np.zeros((T + 1, n, d))
    events: List[list] = [[] for _ in range(n)]
    iterates[0] = X
    for t in range(T + 1):
        try:
            g = np.asarray(G_batch(X), dtype=float)
        except Exception as exc:  # noqa: BLE001 - wrapped with the step index
            raise OracleFailure(t, exc) from exc
        Gs[t] = g
        gnorm = np.linalg.norm(g, axis=1)
        fire = (gnorm <= thresh) & (t - t_pert >= M)
        for i in np.flatnonzero(fire):
            t_pert[i] = t
            u = sample_ball(d, params.r_pert, rngs[i])
            Us[t, i] = u
            events[i].append((t, u))
        X = X - eta * (g + Us[t])
        iterates[t + 1] = X
    norms = np.linalg.norm(Gs, axis=2)
    return [RunTrace(iterates=iterates[:, i].copy(), G=Gs[:, i].copy(), G_norm=norms[:, i].copy(),
                     perturbations=Us[:, i].copy(), perturb_events=events[i], seed=int(seeds[i]))
            for i in range(n)]
