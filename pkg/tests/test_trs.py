import numpy as np
import pytest
from hypothesis import given, strategies as st

from restartdfo.interp_models import QuadraticModel
from restartdfo.trs import TrsProblem, model_decrease, projected_gradient, solve_trs, trsbox


def random_instance(rng, n=None, bounded=None, convex=None):
    n = int(rng.integers(1, 11)) if n is None else n
    g = rng.standard_normal(n) * 10.0 ** rng.uniform(-3, 2)
    A = rng.standard_normal((n, n))
    H = A + A.T
    if convex if convex is not None else rng.random() < 0.4:
        H = A @ A.T + 0.1 * np.eye(n)
    H *= 10.0 ** rng.uniform(-2, 2)
    delta = 10.0 ** rng.uniform(-3, 1)
    lo = hi = None
    if bounded if bounded is not None else rng.random() < 0.6:
        lo = -rng.exponential(delta, n)
        hi = rng.exponential(delta, n)
        lo[rng.random(n) < 0.2] = 0.0
        hi[rng.random(n) < 0.2] = 0.0
    return g, H, delta, lo, hi


def cauchy_bound(g, H, delta, lo, hi):
    gp = projected_gradient(g, lo, hi)
    gn = np.linalg.norm(gp)
    return 0.5 * gn * min(delta, gn / (1 + np.linalg.norm(H, 2)))


def check_step(s, g, H, delta, lo, hi):
    assert np.linalg.norm(s) <= delta * (1 + 1e-10)
    if lo is not None:
        assert np.all(s >= lo - 1e-14) and np.all(s <= hi + 1e-14)
    dec = model_decrease(g, H, s)
    assert dec >= -1e-14
    assert dec >= cauchy_bound(g, H, delta, lo, hi) * (1 - 1e-10) - 1e-15


def test_zero_model_gives_zero_step():
    s = trsbox(np.zeros(3), np.zeros((3, 3)), 1.0)
    assert np.array_equal(s, np.zeros(3))


def test_linear_model_steps_to_boundary():
    s = trsbox(np.array([1.0, 0.0]), np.zeros((2, 2)), 1.0)
    np.testing.assert_allclose(s, [-1.0, 0.0], atol=1e-14)
    assert model_decrease(np.array([1.0, 0.0]), np.zeros((2, 2)), s) == pytest.approx(1.0)


def test_outside_minimizer_lands_on_sphere():
    g, H = np.array([2.0, 0.0]), np.eye(2)
    s = trsbox(g, H, 1.0)
    np.testing.assert_allclose(s, [-1.0, 0.0], atol=1e-12)
    assert model_decrease(g, H, s) == pytest.approx(1.5)
    # dense check on the disk: nothing beats 1.5
    r, th = np.meshgrid(np.linspace(0, 1, 101), np.linspace(0, 2 * np.pi, 361))
    pts = np.stack([(r * np.cos(th)).ravel(), (r * np.sin(th)).ravel()], axis=1)
    best = max(-(pts @ g + 0.5 * np.sum(pts * pts, axis=1)))
    assert best <= 1.5 + 1e-12


def test_bound_activates_first():
    s = trsbox(np.array([1.0, 0.0]), np.zeros((2, 2)), 1.0, lower=np.array([-0.5, -np.inf]))
    np.testing.assert_allclose(s, [-0.5, 0.0], atol=1e-14)


def test_negative_curvature_goes_to_boundary():
    s = trsbox(np.array([1e-3, 0.0]), -np.eye(2), 0.7)
    assert np.linalg.norm(s) == pytest.approx(0.7)
    # a stationary point returns zero even when the curvature is negative
    assert not np.any(trsbox(np.zeros(2), -np.eye(2), 0.7))


def test_problem_validation():
    m = QuadraticModel.zero(2)
    with pytest.raises(ValueError):
        TrsProblem(m, 0.0)
    with pytest.raises(ValueError):
        TrsProblem(m, 1.0, lower=np.array([0.1, -1.0]), upper=np.array([1.0, 1.0]))
    assert np.array_equal(solve_trs(TrsProblem(m, 1.0)), np.zeros(2))


def test_random_battery(rng):
    for _ in range(300):
        g, H, delta, lo, hi = random_instance(rng)
        check_step(trsbox(g, H, delta, lo, hi), g, H, delta, lo, hi)


def test_monotone_in_radius(rng):
    for _ in range(200):
        g, H, delta, lo, hi = random_instance(rng)
        vals = [-model_decrease(g, H, trsbox(g, H, d, lo, hi)) for d in delta * np.array([0.25, 0.5, 1, 2, 4])]
        assert all(b <= a + 1e-12 * (1 + abs(a)) for a, b in zip(vals, vals[1:]))


def test_interior_minimizer_is_newton_step(rng):
    for _ in range(100):
        n = int(rng.integers(1, 8))
        A = rng.standard_normal((n, n))
        H = A @ A.T + np.eye(n)
        g = rng.standard_normal(n)
        newton = -np.linalg.solve(H, g)
        delta = 2 * np.linalg.norm(newton)
        s = trsbox(g, H, delta, -2 * np.abs(newton) - 1, 2 * np.abs(newton) + 1)
        np.testing.assert_allclose(s, newton, atol=1e-6 * max(1, np.linalg.norm(newton)))


@given(st.integers(0, 2**32 - 1))
def test_feasible_and_cauchy_decrease(seed):
    g, H, delta, lo, hi = random_instance(np.random.default_rng(seed))
    check_step(trsbox(g, H, delta, lo, hi), g, H, delta, lo, hi)
