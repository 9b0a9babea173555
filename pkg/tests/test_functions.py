import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.optimize import minimize_scalar

from moreau_escape.errors import NotStronglyConvex
from moreau_escape.functions import KinkedQuartic, solve_monotone_cubic

finite = st.floats(-1e3, 1e3, allow_nan=False)


@given(a=st.floats(0, 1e3), b=st.floats(1e-3, 1e3), rhs=finite)
def test_cubic_root_satisfies_equation(a, b, rhs):
    u = solve_monotone_cubic(a, b, rhs)
    scale = abs(rhs) + 1e-300
    assert abs(a * u**3 + b * u - rhs) <= 1e-12 * max(scale, a * abs(u) ** 3, b * abs(u))
    assert u * rhs >= 0  # a subnormal root may round to zero


def test_cubic_root_linear_case_is_exact():
    assert solve_monotone_cubic(0.0, 4.0, 3.0) == 0.75


def _scalar_prox(fun, v, lam):
    res = minimize_scalar(lambda t: fun(t) + (t - v) ** 2 / (2 * lam),
                          bounds=(v - 20, v + 20), method="bounded",
                          options={"xatol": 1e-12})
    return res.x


@settings(max_examples=60, deadline=None)
@given(
    s_pos=st.floats(0, 3), s_neg=st.floats(0, 3), w4=st.floats(0, 2),
    w2=st.floats(-0.9, 2), w1=st.floats(-1, 1), v=st.floats(-5, 5),
)
def test_scalar_prox_matches_bounded_search(s_pos, s_neg, w4, w2, w1, v):
    f = KinkedQuartic(1, s_pos=s_pos, s_neg=s_neg, w4=w4, w2=w2, w1=w1)
    lam = 0.5  # 1/lam = 2 > 0.9 >= weak convexity
    y, res = f.prox(np.array([v]), lam)
    ref = _scalar_prox(lambda t: float(f.value(np.array([t]))), v, lam)
    assert abs(y[0] - ref) <= 1e-6
    assert res <= 1e-12 * (1 + abs(v) / lam)


def test_min_norm_subgradient_at_kinks():
    f = KinkedQuartic(3, s_pos=[1, 0.5, 1], s_neg=[1, 2, 1], w1=[0.3, -1.0, 5.0])
    g = f.subgrad(np.zeros(3))
    # smooth part is w1; add the closest point of [-s_neg, s_pos] to -w1
    np.testing.assert_allclose(g, [0.0, -0.5, 4.0])


def test_weak_convexity_of_coupled_quadratic():
    Q = np.array([[0.0, 2.0], [2.0, 0.0]])
    f = KinkedQuartic(2, w2=[1.0, 1.0], Q=Q)
    # eigenvalues of diag(1, 1) + Q are 3 and -1
    assert f.weak_convexity() == pytest.approx(1.0)


def test_diagonal_coupling_is_folded():
    f = KinkedQuartic(2, w2=[1.0, 0.0], Q=np.diag([2.0, 3.0]))
    assert f.separable
    np.testing.assert_array_equal(f.w2, [3.0, 3.0])


def test_coupled_prox_matches_optimality(rng):
    Q = 0.3 * np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])
    f = KinkedQuartic(3, s_pos=1.0, s_neg=0.5, w4=1.0, w2=-1.0, Q=Q)
    v = rng.normal(size=(50, 3)) * 2
    y, res = f.prox(v, 0.5)
    assert np.all(res <= 1e-11)
    # the residual is recomputed independently of the solver
    np.testing.assert_allclose(f.prox_residual(y, v, 0.5), res)


def test_prox_rejects_too_large_parameter():
    f = KinkedQuartic(1, w2=-1.0)
    with pytest.raises(NotStronglyConvex):
        f.prox(np.array([0.0]), 1.0)


def test_rejects_negative_kinks():
    with pytest.raises(ValueError):
        KinkedQuartic(1, s_pos=-1.0)
