"""Global optimization test problems, noise wrappers and random starts.

Formulas follow the Ali, Khompatraporn & Zabinsky (2005) collection. Problems
whose dimension was raised (or Griewank's, lowered) default to the modified
dimension; ``original=True`` in :func:`get_problem` restores n=10.
"""
from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Callable, Dict, Optional

import numpy as np

__all__ = [
    "ProblemSpec",
    "NoiseModel",
    "NoisyObjective",
    "ackley_family",
    "apply_noise",
    "noise_stats",
    "random_start",
    "evaluate",
    "register_problem",
    "get_problem",
    "problem_names",
    "registry_manifest",
    "scaled_ackley",
]

PI = np.pi


@dataclass(frozen=True)
class ProblemSpec:
    name: str
    n: int
    lower: np.ndarray
    upper: np.ndarray
    f_star: float
    evaluator: Callable[[np.ndarray], float] = field(repr=False, compare=False)
    x_star: Optional[np.ndarray] = None
    original_n: Optional[int] = None

    @property
    def bounds(self):
        return self.lower, self.upper

    def __call__(self, x):
        return evaluate(self, x)


def evaluate(spec: ProblemSpec, x) -> float:
    x = np.asarray(x, dtype=float)
    if x.shape != (spec.n,):
        raise ValueError("%s expects a vector of length %d, got shape %s" % (spec.name, spec.n, x.shape))
    return float(spec.evaluator(x))


# -- objective functions ----------------------------------------------------

def ackley_family(x, a=20.0, b=0.2, c=PI) -> float:
    """Ackley with tunable parameters; the radial term uses ||x||_2 / sqrt(n)."""
    x = np.asarray(x, dtype=float)
    n = x.size
    r = np.linalg.norm(x) / np.sqrt(n)
    return float(-a * np.exp(-b * r) - np.exp(np.sum(np.cos(c * x)) / n) + a + np.e)


def ackley(x):
    return ackley_family(x, 20.0, 0.2, 2 * PI)


def aluffi_pentini(x):
    x1, x2 = x
    return 0.25 * x1**4 - 0.5 * x1**2 + 0.1 * x1 + 0.5 * x2**2


def becker_lago(x):
    return float(np.sum((np.abs(x) - 5.0) ** 2))


def bohachevsky1(x):
    x1, x2 = x
    return x1**2 + 2 * x2**2 - 0.3 * np.cos(3 * PI * x1) - 0.4 * np.cos(4 * PI * x2) + 0.7


def bohachevsky2(x):
    x1, x2 = x
    return x1**2 + 2 * x2**2 - 0.3 * np.cos(3 * PI * x1) * np.cos(4 * PI * x2) + 0.3


def branin(x):
    x1, x2 = x
    return (x2 - 5.1 / (4 * PI**2) * x1**2 + 5 * x1 / PI - 6) ** 2 + 10 * (1 - 1 / (8 * PI)) * np.cos(x1) + 10


def camel3(x):
    x1, x2 = x
    return 2 * x1**2 - 1.05 * x1**4 + x1**6 / 6 + x1 * x2 + x2**2


def camel6(x):
    x1, x2 = x
    return 4 * x1**2 - 2.1 * x1**4 + x1**6 / 3 + x1 * x2 - 4 * x2**2 + 4 * x2**4


def cosine_mixture(x):
    return float(np.sum(x**2) - 0.1 * np.sum(np.cos(5 * PI * x)))


def easom(x):
    x1, x2 = x
    return -np.cos(x1) * np.cos(x2) * np.exp(-((x1 - PI) ** 2) - (x2 - PI) ** 2)


def exponential(x):
    return float(-np.exp(-0.5 * np.sum(x**2)))


def goldstein_price(x):
    x1, x2 = x
    a = 1 + (x1 + x2 + 1) ** 2 * (19 - 14 * x1 + 3 * x1**2 - 14 * x2 + 6 * x1 * x2 + 3 * x2**2)
    b = 30 + (2 * x1 - 3 * x2) ** 2 * (18 - 32 * x1 + 12 * x1**2 + 48 * x2 - 36 * x1 * x2 + 27 * x2**2)
    return a * b


def griewank(x):
    i = np.arange(1, x.size + 1)
    return float(1 + np.sum(x**2) / 4000 - np.prod(np.cos(x / np.sqrt(i))))


_H_C = np.array([1.0, 1.2, 3.0, 3.2])
_H3_A = np.array([[3, 10, 30], [0.1, 10, 35], [3, 10, 30], [0.1, 10, 35]])
_H3_P = np.array([[0.3689, 0.1170, 0.2673], [0.4699, 0.4387, 0.7470],
                  [0.1091, 0.8732, 0.5547], [0.03815, 0.5743, 0.8828]])
_H6_A = np.array([[10, 3, 17, 3.5, 1.7, 8], [0.05, 10, 17, 0.1, 8, 14],
                  [3, 3.5, 1.7, 10, 17, 8], [17, 8, 0.05, 10, 0.1, 14]])
_H6_P = 1e-4 * np.array([[1312, 1696, 5569, 124, 8283, 5886], [2329, 4135, 8307, 3736, 1004, 9991],
                         [2348, 1451, 3522, 2883, 3047, 6650], [4047, 8828, 8732, 5743, 1091, 381]])


def hartman3(x):
    return float(-np.sum(_H_C * np.exp(-np.sum(_H3_A * (x - _H3_P) ** 2, axis=1))))


def hartman6(x):
    return float(-np.sum(_H_C * np.exp(-np.sum(_H6_A * (x - _H6_P) ** 2, axis=1))))


def levy_montalvo1(x):
    n = x.size
    y = 1 + 0.25 * (x + 1)
    s = 10 * np.sin(PI * y[0]) ** 2 + np.sum((y[:-1] - 1) ** 2 * (1 + 10 * np.sin(PI * y[1:]) ** 2)) + (y[-1] - 1) ** 2
    return float(PI / n * s)


def levy_montalvo2(x):
    s = (np.sin(3 * PI * x[0]) ** 2
         + np.sum((x[:-1] - 1) ** 2 * (1 + np.sin(3 * PI * x[1:]) ** 2))
         + (x[-1] - 1) ** 2 * (1 + np.sin(2 * PI * x[-1]) ** 2))
    return float(0.1 * s)


def rastrigin(x):
    return float(10 * x.size + np.sum(x**2 - 10 * np.cos(2 * PI * x)))


def rosenbrock(x):
    return float(np.sum(100 * (x[1:] - x[:-1] ** 2) ** 2 + (x[:-1] - 1) ** 2))


def salomon(x):
    r = np.linalg.norm(x)
    return float(1 - np.cos(2 * PI * r) + 0.1 * r)


def schaffer1(x):
    r2 = x[0] ** 2 + x[1] ** 2
    return 0.5 + (np.sin(np.sqrt(r2)) ** 2 - 0.5) / (1 + 0.001 * r2) ** 2


def schaffer2(x):
    r2 = x[0] ** 2 + x[1] ** 2
    return r2**0.25 * (np.sin(50 * r2**0.1) ** 2 + 1)


_SHEKEL_A = np.array([[4, 4, 4, 4], [1, 1, 1, 1], [8, 8, 8, 8], [6, 6, 6, 6], [3, 7, 3, 7],
                      [2, 9, 2, 9], [5, 5, 3, 3], [8, 1, 8, 1], [6, 2, 6, 2], [7, 3.6, 7, 3.6]], dtype=float)
_SHEKEL_C = np.array([0.1, 0.2, 0.2, 0.4, 0.4, 0.6, 0.3, 0.7, 0.5, 0.5])


def _shekel(m):
    def f(x):
        return float(-np.sum(1.0 / (np.sum((x - _SHEKEL_A[:m]) ** 2, axis=1) + _SHEKEL_C[:m])))
    f.__name__ = "shekel%d" % m
    return f


def shubert(x):
    j = np.arange(1, 6)
    return float(np.prod([np.sum(j * np.cos((j + 1) * xi + j)) for xi in x]))


def wood(x):
    x1, x2, x3, x4 = x
    return (100 * (x2 - x1**2) ** 2 + (1 - x1) ** 2 + 90 * (x4 - x3**2) ** 2 + (1 - x3) ** 2
            + 10.1 * ((x2 - 1) ** 2 + (x4 - 1) ** 2) + 19.8 * (x2 - 1) * (x4 - 1))


# -- registry ---------------------------------------------------------------

_REGISTRY: Dict[str, Callable[..., ProblemSpec]] = {}


def register_problem(name: str, factory: Callable[..., ProblemSpec], overwrite: bool = False):
    """Add a problem factory ``factory(n=None) -> ProblemSpec`` under ``name``."""
    if name in _REGISTRY and not overwrite:
        raise ValueError("problem %r already registered" % name)
    _REGISTRY[name] = factory


def _box(n, lo, hi):
    return np.broadcast_to(np.asarray(lo, float), (n,)).copy(), np.broadcast_to(np.asarray(hi, float), (n,)).copy()


def _fixed(name, func, n, lo, hi, f_star, x_star=None):
    def factory(n_override=None):
        if n_override not in (None, n):
            raise ValueError("%s has fixed dimension %d" % (name, n))
        lower, upper = _box(n, lo, hi)
        xs = None if x_star is None else np.asarray(x_star, float)
        return ProblemSpec(name, n, lower, upper, f_star, func, xs)
    register_problem(name, factory)


def _scalable(name, func, n_default, lo, hi, f_star, x_star_value=None, original_n=None, f_star_of_n=None):
    def factory(n_override=None):
        n = n_default if n_override is None else int(n_override)
        lower, upper = _box(n, lo, hi)
        xs = None if x_star_value is None else np.full(n, float(x_star_value))
        fs = f_star if f_star_of_n is None else f_star_of_n(n)
        return ProblemSpec(name, n, lower, upper, fs, func, xs, original_n)
    register_problem(name, factory)


_scalable("ackley", ackley, 10, -30, 30, 0.0, 0.0)
_fixed("aluffi_pentini", aluffi_pentini, 2, -10, 10, -0.3523861, [-1.0466805696, 0.0])
_fixed("becker_lago", becker_lago, 2, -10, 10, 0.0, [5.0, 5.0])
_fixed("bohachevsky1", bohachevsky1, 2, -50, 50, 0.0, [0.0, 0.0])
_fixed("bohachevsky2", bohachevsky2, 2, -50, 50, 0.0, [0.0, 0.0])
# 3.926991 (= 5*pi/4) is sometimes listed as the minimum; the true value is 5/(4*pi).
_fixed("branin", branin, 2, [-5, 0], [10, 15], 5 / (4 * PI), [PI, 2.275])
_fixed("camel3", camel3, 2, -5, 5, 0.0, [0.0, 0.0])
_fixed("camel6", camel6, 2, -5, 5, -1.031628, [0.0898420131, -0.7126564033])
_scalable("cosine_mixture", cosine_mixture, 4, -1, 1, -0.4, 0.0, f_star_of_n=lambda n: -0.1 * n)
_fixed("easom", easom, 2, -10, 10, -1.0, [PI, PI])
_scalable("exponential", exponential, 40, -1, 1, -1.0, 0.0, original_n=10)
_fixed("goldstein_price", goldstein_price, 2, -2, 2, 3.0, [0.0, -1.0])
_scalable("griewank", griewank, 5, -600, 600, 0.0, 0.0, original_n=10)
_fixed("hartman3", hartman3, 3, 0, 1, -3.862782, [0.1146143, 0.5556488, 0.8525470])
_fixed("hartman6", hartman6, 6, 0, 1, -3.322368, [0.2016895, 0.1500107, 0.4768740, 0.2753324, 0.3116516, 0.6573005])
_scalable("levy_montalvo1", levy_montalvo1, 3, -10, 10, 0.0, -1.0)
_scalable("levy_montalvo2", levy_montalvo2, 10, -5, 5, 0.0, 1.0)
_scalable("rastrigin", rastrigin, 30, -5.12, 5.12, 0.0, 0.0, original_n=10)
_scalable("rosenbrock", rosenbrock, 50, -30, 30, 0.0, 1.0, original_n=10)
_scalable("salomon", salomon, 50, -100, 100, 0.0, 0.0, original_n=10)
_fixed("schaffer1", schaffer1, 2, -100, 100, 0.0, [0.0, 0.0])
_fixed("schaffer2", schaffer2, 2, -100, 100, 0.0, [0.0, 0.0])
# Commonly listed Shekel minima are the values at (4,4,4,4); the exact minima lie ~1e-4 lower.
_fixed("shekel5", _shekel(5), 4, 0, 10, -10.15320, [4.0] * 4)
_fixed("shekel7", _shekel(7), 4, 0, 10, -10.40282, [4.0] * 4)
_fixed("shekel10", _shekel(10), 4, 0, 10, -10.53628, [4.0] * 4)
_fixed("shubert", shubert, 2, -10, 10, -186.7309, [-7.0835064, 4.8580569])
_fixed("wood", wood, 4, -10, 10, 0.0, [1.0] * 4)
# demonstration problems
_fixed("ackley2d", ackley, 2, -26, 26, 0.0, [0.0, 0.0])


def scaled_ackley(n: int) -> ProblemSpec:
    """Less oscillatory Ackley, (a,b,c) = (20, 0.2, pi), on [-3, 9]^n."""
    lower, upper = _box(n, -3, 9)
    return ProblemSpec("ackley_pi", n, lower, upper, 0.0, ackley_family, np.zeros(n))


register_problem("ackley_pi", lambda n=None: scaled_ackley(5 if n is None else int(n)))


def problem_names():
    return sorted(_REGISTRY)


def get_problem(name: str, n: Optional[int] = None, original: bool = False) -> ProblemSpec:
    if name not in _REGISTRY:
        raise KeyError("unknown problem %r; valid names: %s" % (name, ", ".join(problem_names())))
    spec = _REGISTRY[name](n)
    if original and spec.original_n is not None and n is None:
        spec = _REGISTRY[name](spec.original_n)
    return spec


def registry_manifest() -> str:
    """JSON manifest of the default-dimension registry: name, n, bounds, f*."""
    rows = []
    for name in problem_names():
        spec = get_problem(name)
        rows.append({
            "name": name,
            "n": spec.n,
            "lower": spec.lower.tolist(),
            "upper": spec.upper.tolist(),
            "f_star": spec.f_star,
        })
    return json.dumps({"problems": rows}, indent=2)


# -- noise ------------------------------------------------------------------

NOISE_KINDS = ("smooth", "multiplicative_gaussian", "additive_gaussian")


@dataclass(frozen=True)
class NoiseModel:
    kind: str = "smooth"
    sigma: float = 1e-2
    seed: int = 0

    def __post_init__(self):
        if self.kind not in NOISE_KINDS:
            raise ValueError("noise kind must be one of %s" % (NOISE_KINDS,))
        if self.sigma < 0:
            raise ValueError("sigma must be nonnegative")

    @property
    def is_smooth(self):
        return self.kind == "smooth" or self.sigma == 0


def apply_noise(model: NoiseModel, true_value: float, draw: float) -> float:
    if model.kind == "multiplicative_gaussian":
        return true_value * (1 + model.sigma * draw)
    if model.kind == "additive_gaussian":
        return true_value + model.sigma * draw
    return true_value


def noise_draw(seed: int, index: int) -> float:
    """Standard normal draw keyed by (seed, evaluation index)."""
    return float(np.random.default_rng([int(seed), int(index)]).standard_normal())


class NoisyObjective:
    """Callable problem instance; the k-th call uses the draw keyed by (seed, k)."""

    def __init__(self, spec: ProblemSpec, noise: NoiseModel = NoiseModel()):
        self.spec = spec
        self.noise = noise
        self.calls = 0

    def __call__(self, x) -> float:
        fx = evaluate(self.spec, x)
        k = self.calls
        self.calls += 1
        if self.noise.is_smooth:
            return fx
        return apply_noise(self.noise, fx, noise_draw(self.noise.seed, k))


def noise_stats(spec: ProblemSpec, model: NoiseModel):
    """(E[f~(x*)], std f~(x*)) in closed form from f*."""
    f_star = spec.f_star
    if model.is_smooth:
        return f_star, 0.0
    if model.kind == "additive_gaussian":
        return f_star, model.sigma
    if f_star is None:
        raise ValueError("multiplicative noise statistics need a known minimum")
    return f_star, model.sigma * abs(f_star)


def random_start(spec: ProblemSpec, seed) -> np.ndarray:
    """Uniform point in the problem's box, deterministic per seed."""
    if not (np.all(np.isfinite(spec.lower)) and np.all(np.isfinite(spec.upper))):
        raise ValueError("random starts need finite bounds")
    rng = np.random.default_rng(seed)
    return spec.lower + rng.random(spec.n) * (spec.upper - spec.lower)
