import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from moreau_escape.errors import MuTooLarge, OutOfDomain
from moreau_escape.problems import Form, evaluate, exact_prox, get_problem, subgrad


def _f_scalar(x, y):
    # independent scalar transcription of |x| + (y^2 - 1)^2 / 4
    return abs(x) + 0.25 * (y * y - 1.0) ** 2


@pytest.mark.parametrize("point, expected", [
    ((0.0, 0.0), 0.25),
    ((1.0, 1.0), 1.0),
    ((-0.5, 0.5), 0.640625),
])
def test_abs_quartic_values(abs_quartic, point, expected):
    assert evaluate(abs_quartic, point) == pytest.approx(expected, abs=1e-15)
    assert _f_scalar(*point) == pytest.approx(expected, abs=1e-15)


def test_evaluate_is_sum_of_additive_parts(problem, rng):
    x = problem.domain_box.sample(rng, 100)
    parts = problem.decompositions[Form.ADDITIVE]
    np.testing.assert_array_equal(evaluate(problem, x), parts.l.value(x) + parts.r.value(x))


def test_all_splittings_agree(problem, rng):
    x = problem.domain_box.sample(rng, 1000)
    f = problem.objective.value(x)
    scale = 1.0 + np.abs(f)
    sp = problem.decompositions[Form.SMOOTH_PLUS]
    co = problem.decompositions[Form.COMPOSITE]
    assert np.all(np.abs(evaluate(problem, x) - f) <= 1e-13 * scale)
    assert np.all(np.abs(sp.F.value(x) + sp.r.value(x) - f) <= 1e-13 * scale)
    assert np.all(np.abs(co.h.value(co.c.value(x)) + co.r.value(x) - f) <= 1e-13 * scale)


@pytest.mark.parametrize("point, expected", [
    ((2.0, 0.0), (1.0, 0.0)),
    ((0.0, 0.0), (0.0, 0.0)),
    ((1.0, 2.0), (1.0, 6.0)),
])
def test_abs_quartic_subgradients(abs_quartic, point, expected):
    np.testing.assert_allclose(subgrad(abs_quartic, point), expected, atol=1e-15)


def test_subgradient_matches_central_differences_at_smooth_points(abs_quartic):
    x, y, h = 1.0, 2.0, 1e-6
    fd = [(_f_scalar(x + h, y) - _f_scalar(x - h, y)) / (2 * h),
          (_f_scalar(x, y + h) - _f_scalar(x, y - h)) / (2 * h)]
    np.testing.assert_allclose(subgrad(abs_quartic, (x, y)), fd, rtol=1e-8)


def test_weak_convexity_inequality(problem, rng):
    x = problem.domain_box.sample(rng, 1000)
    y = problem.domain_box.sample(rng, 1000)
    v = subgrad(problem, x)
    lhs = evaluate(problem, y)
    rhs = (evaluate(problem, x) + np.sum(v * (y - x), axis=1)
           - 0.5 * problem.rho * np.sum((y - x) ** 2, axis=1))
    assert np.all(lhs >= rhs - 1e-9 * (1 + np.abs(lhs)))


def test_weak_convexity_inequality_at_kinks(problem, rng):
    x = problem.domain_box.sample(rng, 500)
    x[:, 0] = 0.0  # put the first coordinate on a kink
    y = problem.domain_box.sample(rng, 500)
    v = subgrad(problem, x)
    gap = (evaluate(problem, y) - evaluate(problem, x) - np.sum(v * (y - x), axis=1)
           + 0.5 * problem.rho * np.sum((y - x) ** 2, axis=1))
    assert np.all(gap >= -1e-9)


def test_out_of_domain(abs_quartic):
    with pytest.raises(OutOfDomain):
        evaluate(abs_quartic, (100.0, 0.0))
    with pytest.raises(OutOfDomain):
        subgrad(abs_quartic, (np.nan, 0.0))


def test_exact_prox_examples(abs_quartic):
    np.testing.assert_array_equal(exact_prox(abs_quartic, (0.0, 0.0), 0.5).point, [0.0, 0.0])
    np.testing.assert_allclose(exact_prox(abs_quartic, (10.0, 0.0), 0.5).point, [9.5, 0.0],
                               atol=1e-15)


def test_exact_prox_matches_scalar_search(abs_quartic, rng):
    # the problem is separable, so each coordinate is a 1-d bounded search
    mu = 0.5
    for x0 in rng.uniform(-3, 3, size=(20, 2)):
        got = exact_prox(abs_quartic, x0, mu).point
        ref_x = minimize_scalar(lambda t: abs(t) + (t - x0[0]) ** 2 / (2 * mu),
                                bounds=(-5, 5), method="bounded", options={"xatol": 1e-12}).x
        ref_y = minimize_scalar(lambda t: 0.25 * (t * t - 1) ** 2 + (t - x0[1]) ** 2 / (2 * mu),
                                bounds=(-5, 5), method="bounded", options={"xatol": 1e-12}).x
        np.testing.assert_allclose(got, [ref_x, ref_y], atol=1e-6)


def test_prox_fixes_critical_points(problem):
    mu = 0.5 if problem.rho * 0.5 < 1 else 0.5 / problem.rho
    for c in problem.minimizers + problem.saddles:
        c = np.asarray(c, dtype=float)
        np.testing.assert_array_equal(exact_prox(problem, c, mu).point, c)


def test_prox_residual_and_strong_convexity(problem, rng):
    mu = problem.mu
    tol = 1e-12
    x0 = problem.domain_box.sample(rng, 50)
    gt = exact_prox(problem, x0, mu, tol)
    assert np.all(gt.residual <= tol * (1 + np.abs(x0).max(axis=1) / mu))
    f = problem.objective.value
    for x, p in zip(x0, gt.point):
        ys = p + rng.normal(scale=0.3, size=(100, problem.dim))
        lhs = f(ys) + np.sum((ys - x) ** 2, axis=1) / (2 * mu)
        rhs = (f(p) + np.sum((p - x) ** 2) / (2 * mu)
               + 0.5 * (1 / mu - problem.rho) * np.sum((ys - p) ** 2, axis=1))
        assert np.all(lhs >= rhs - tol)


def test_prox_is_lipschitz(problem, rng):
    mu = problem.mu
    tol = 1e-12
    x = problem.domain_box.sample(rng, 500)
    y = x + rng.normal(scale=0.5, size=x.shape)
    px = exact_prox(problem, x, mu).point
    py = exact_prox(problem, y, mu).point
    bound = np.linalg.norm(x - y, axis=1) / (1 - mu * problem.rho) + 2 * tol
    assert np.all(np.linalg.norm(px - py, axis=1) <= bound)


def test_envelope_minorizes(problem, rng):
    mu = problem.mu
    x = problem.domain_box.sample(rng, 1000)
    p = exact_prox(problem, x, mu).point
    f = problem.objective.value
    env = f(p) + np.sum((p - x) ** 2, axis=1) / (2 * mu)
    assert np.all(env <= f(x) + 1e-12 * (1 + np.abs(f(x))))


def test_mu_too_large(abs_quartic):
    with pytest.raises(MuTooLarge):
        exact_prox(abs_quartic, (0.0, 0.0), 1.0)


def test_unknown_problem():
    with pytest.raises(KeyError):
        get_problem("nope")


def test_sep_piecewise_dimension_is_configurable():
    p = get_problem("sep_piecewise", dim=7)
    assert p.dim == 7
    assert p.objective.weak_convexity() == pytest.approx(1.0)
