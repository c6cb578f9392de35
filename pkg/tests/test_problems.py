import math

import numpy as np
import pytest
from hypothesis import given, strategies as st

from restartdfo.problems import (
    NoiseModel,
    NoisyObjective,
    ackley_family,
    apply_noise,
    evaluate,
    get_problem,
    noise_draw,
    noise_stats,
    problem_names,
    random_start,
    register_problem,
    registry_manifest,
)

from oracles import ackley_scalar

TABLE = {
    "ackley": 0.0, "aluffi_pentini": -0.3523861, "becker_lago": 0.0, "bohachevsky1": 0.0,
    "bohachevsky2": 0.0, "branin": 0.397887, "camel3": 0.0, "camel6": -1.031628,
    "cosine_mixture": -0.4, "easom": -1.0, "exponential": -1.0, "goldstein_price": 3.0,
    "griewank": 0.0, "hartman3": -3.862782, "hartman6": -3.322368, "levy_montalvo1": 0.0,
    "levy_montalvo2": 0.0, "rastrigin": 0.0, "rosenbrock": 0.0, "salomon": 0.0, "schaffer1": 0.0,
    "schaffer2": 0.0, "shekel5": -10.1532, "shekel7": -10.40282, "shekel10": -10.53628,
    "shubert": -186.7309, "wood": 0.0,
}


def test_registry_covers_required_subset():
    assert set(TABLE) <= set(problem_names())


@pytest.mark.parametrize("name", sorted(TABLE))
def test_minimum_value_and_point(name):
    spec = get_problem(name)
    assert spec.f_star == pytest.approx(TABLE[name], rel=1e-6, abs=1e-6)
    if spec.x_star is not None:
        assert spec(np.asarray(spec.x_star)) == pytest.approx(spec.f_star, rel=1e-6, abs=1e-6)


@pytest.mark.parametrize("name", sorted(problem_names()))
def test_random_samples_not_below_minimum(name):
    spec = get_problem(name)
    X = np.random.default_rng(0).uniform(spec.lower, spec.upper, size=(10**4 if spec.n <= 10 else 2000, spec.n))
    assert min(spec(x) for x in X) >= spec.f_star - 1e-9


def test_table_points():
    assert evaluate(get_problem("ackley"), np.zeros(10)) == pytest.approx(0, abs=1e-12)
    assert evaluate(get_problem("goldstein_price"), np.array([0.0, -1.0])) == pytest.approx(3.0)
    assert evaluate(get_problem("camel6"), np.array([0.08984201, -0.7126564])) == pytest.approx(-1.031628, abs=1e-6)
    assert evaluate(get_problem("camel6"), np.array([-0.08984201, 0.7126564])) == pytest.approx(-1.031628, abs=1e-6)
    assert evaluate(get_problem("rastrigin"), np.zeros(30)) == 0.0
    assert get_problem("rastrigin").n == 30 and get_problem("rastrigin", original=True).n == 10


def test_dimension_mismatch():
    with pytest.raises(ValueError):
        evaluate(get_problem("branin"), np.zeros(3))


def test_unknown_problem_lists_names():
    with pytest.raises(KeyError, match="branin"):
        get_problem("nosuch")


def test_register_extension_point(monkeypatch):
    from restartdfo import problems

    monkeypatch.setattr(problems, "_REGISTRY", dict(problems._REGISTRY))
    spec = get_problem("branin")
    register_problem("branin_copy_for_test", lambda n=None: spec)
    assert get_problem("branin_copy_for_test") is spec
    with pytest.raises(ValueError):
        register_problem("branin", lambda n=None: spec)


def test_manifest_lists_every_problem():
    import json

    names = [row["name"] for row in json.loads(registry_manifest())["problems"]]
    assert set(TABLE) <= set(names)


def test_ackley_family_examples():
    assert ackley_family(np.zeros(4)) == pytest.approx(0, abs=1e-12)
    assert ackley_family(np.array([2.0])) == pytest.approx(ackley_scalar([2.0]), rel=1e-14)


@given(st.lists(st.floats(-9, 9), min_size=1, max_size=8))
def test_ackley_family_matches_transcription_and_is_even(xs):
    x = np.array(xs)
    assert ackley_family(x) == pytest.approx(ackley_scalar(xs), rel=1e-12, abs=1e-12)
    assert ackley_family(x) == pytest.approx(ackley_family(-x), rel=1e-14, abs=1e-14)


def test_apply_noise_examples():
    assert apply_noise(NoiseModel("multiplicative_gaussian", 1e-2), 2.0, 1.0) == pytest.approx(2.02)
    assert apply_noise(NoiseModel("additive_gaussian", 0.0), 2.0, 1.3) == 2.0
    assert apply_noise(NoiseModel("smooth"), 2.0, 1.3) == 2.0
    with pytest.raises(ValueError):
        NoiseModel("uniform")
    with pytest.raises(ValueError):
        NoiseModel("additive_gaussian", -1.0)


@pytest.mark.parametrize("kind", ["additive_gaussian", "multiplicative_gaussian"])
def test_noise_is_mean_consistent(kind):
    spec = get_problem("goldstein_price")
    x = np.array([0.3, -0.2])
    obj = NoisyObjective(spec, NoiseModel(kind, 1e-2, seed=5))
    draws = np.array([obj(x) for _ in range(10**5)])
    se = draws.std(ddof=1) / math.sqrt(draws.size)
    assert abs(draws.mean() - spec(x)) <= 3 * se


def test_noise_streams_are_instance_isolated():
    spec = get_problem("branin")
    x = np.array([1.0, 2.0])
    a = NoisyObjective(spec, NoiseModel("additive_gaussian", 1.0, seed=1))
    b = NoisyObjective(spec, NoiseModel("additive_gaussian", 1.0, seed=2))
    va = np.array([a(x) for _ in range(2000)])
    vb = np.array([b(x) for _ in range(2000)])
    assert abs(np.corrcoef(va, vb)[0, 1]) < 0.1
    c = NoisyObjective(spec, NoiseModel("additive_gaussian", 1.0, seed=1))
    assert [c(x) for _ in range(5)] == list(va[:5])
    assert noise_draw(1, 3) == noise_draw(1, 3) != noise_draw(1, 4)


def test_noise_stats():
    gp, ack = get_problem("goldstein_price"), get_problem("ackley")
    assert noise_stats(gp, NoiseModel("additive_gaussian", 1e-2)) == (3.0, 1e-2)
    assert noise_stats(ack, NoiseModel("multiplicative_gaussian", 1e-2))[1] == 0.0
    assert noise_stats(gp, NoiseModel("multiplicative_gaussian", 1e-2))[1] == pytest.approx(0.03)
    assert noise_stats(gp, NoiseModel())[1] == 0.0


def test_random_start():
    spec = get_problem("hartman6")
    x = random_start(spec, 3)
    assert np.all((x >= 0) & (x <= 1))
    assert np.array_equal(x, random_start(spec, 3))
    spec = get_problem("branin")
    X = np.array([random_start(spec, s) for s in range(10**4)])
    se = (spec.upper - spec.lower) / math.sqrt(12 * len(X))
    assert np.all(np.abs(X.mean(axis=0) - (spec.lower + spec.upper) / 2) <= 3 * se)
