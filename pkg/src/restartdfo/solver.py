"""Model-based derivative-free trust-region solver with multiple restarts.

The main loop takes one of four phases per iteration (safety, successful,
model improvement, unsuccessful). When progress stalls, a restart resets
the trust-region radius to ``delta_reset`` and either rebuilds the
interpolation set (hard) or moves a few of its points (soft). In adaptive
mode ``delta_reset`` grows by a constant factor after each restart that
failed to improve the best value found so far.
"""
from __future__ import annotations

import logging
from collections import deque
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .interp_models import (
    InterpolationSet,
    PoorGeometryError,
    QuadraticModel,
    build_initial_set,
    geometry_point,
    lagrange_basis,
    max_points,
    select_replacement_index,
    solve_interpolation,
)
from .trs import TrsProblem, model_decrease, solve_trs

__all__ = [
    "SolverOptions",
    "SolverState",
    "SolveResult",
    "RestartRecord",
    "ScaledBox",
    "BudgetExhausted",
    "minimize",
    "iterate",
    "ratio",
    "check_restart_triggers",
    "check_termination",
    "hard_restart",
    "soft_restart",
    "update_reset_radius",
    "scale_problem",
    "init_state",
]

logger = logging.getLogger(__name__)

RESTART_MODES = ("none", "hard", "soft")
RADIUS_MODES = ("fixed", "adaptive")
ACCEPT_RATIO = 0.1
PROGRESS_TOL = 1e-12


class BudgetExhausted(Exception):
    reason = "budget"


@dataclass
class SolverOptions:
    p: Optional[int] = None
    delta0: Optional[float] = None
    rho_end: float = 1e-8
    max_evals: Optional[int] = None
    restart_mode: str = "soft"
    restart_radius_mode: str = "fixed"
    adaptive_factor: float = 1.1
    soft_restart_moves: Optional[int] = None
    noise_aware: bool = False
    noise_level: Optional[float] = None
    objective_target: Optional[float] = None
    scale_to_unit_box: Optional[bool] = None
    max_consecutive_failed_restarts: int = 10
    max_total_failed_restarts: int = 20
    rng_seed: Optional[int] = None
    slow_window: Optional[int] = None
    slow_threshold: float = 1e-8
    diverging_window: int = 5
    geometry_distance_factor: float = 10.0
    poisedness_limit: float = 100.0
    radius_increase: float = 2.0
    radius_decrease: Optional[float] = None
    max_radius_factor: float = 1e10

    def validate(self, n: int):
        p = self.npt(n)
        if not n + 1 <= p <= max_points(n):
            raise ValueError("p must lie in [n+1, (n+1)(n+2)/2]")
        if self.restart_mode not in RESTART_MODES:
            raise ValueError("restart_mode must be one of %s" % (RESTART_MODES,))
        if self.restart_radius_mode not in RADIUS_MODES:
            raise ValueError("restart_radius_mode must be one of %s" % (RADIUS_MODES,))
        if not self.adaptive_factor > 1:
            raise ValueError("adaptive_factor must exceed 1")
        if not 1 <= self.soft_moves(n) <= p:
            raise ValueError("soft_restart_moves must lie in [1, p]")
        if self.delta0 is not None and not self.delta0 > self.rho_end > 0:
            raise ValueError("need delta0 > rho_end > 0")

    def npt(self, n: int) -> int:
        if self.p is not None:
            return int(self.p)
        return max_points(n) if self.noise_aware else 2 * n + 1

    def soft_moves(self, n: int) -> int:
        return min(3, self.npt(n)) if self.soft_restart_moves is None else int(self.soft_restart_moves)

    def shrink_factor(self) -> float:
        if self.radius_decrease is not None:
            return self.radius_decrease
        return 0.98 if self.noise_aware else 0.5


@dataclass(frozen=True)
class ScaledBox:
    """Affine map between the box [lower, upper] and the unit cube."""

    lower: np.ndarray
    upper: np.ndarray

    @property
    def width(self):
        return self.upper - self.lower

    def to_unit(self, x):
        return (np.asarray(x, float) - self.lower) / self.width

    def from_unit(self, u):
        return self.lower + np.asarray(u, float) * self.width


def scale_problem(lower, upper) -> ScaledBox:
    lower = np.asarray(lower, float)
    upper = np.asarray(upper, float)
    if not (np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))):
        raise ValueError("scaling needs finite bounds")
    if np.any(upper - lower <= 0):
        raise ValueError("every bound must have positive width")
    return ScaledBox(lower, upper)


@dataclass
class RestartRecord:
    trigger: str
    kind: str
    delta_reset: float
    eval_index: int
    f_before: float
    f_after: Optional[float] = None


@dataclass
class SolveResult:
    x: np.ndarray
    f: float
    nf: int
    reason: str
    restarts: List[RestartRecord]
    xs: np.ndarray
    fs: np.ndarray
    iterate_indices: List[int] = field(default_factory=list)
    sources: List[str] = field(default_factory=list)

    @property
    def best_so_far(self) -> np.ndarray:
        return np.minimum.accumulate(_finite_or_inf(self.fs)) if len(self.fs) else np.array([])

    def restarts_before(self, k: int) -> int:
        """Restarts begun before evaluation number k (1-based)."""
        return sum(1 for r in self.restarts if r.eval_index < k)

    def first_eval_reaching(self, threshold: float) -> Optional[int]:
        hit = np.flatnonzero(self.best_so_far <= threshold)
        return int(hit[0]) + 1 if hit.size else None

    def to_trace(self, solver="solver", problem="custom", instance=0, seed=0, **metadata):
        from .bench import RunTrace

        meta = {"n": self.x.size, "reason": self.reason, "restarts": len(self.restarts)}
        meta.update(metadata)
        return RunTrace(solver, problem, instance, seed, self.fs, metadata={k: str(v) for k, v in meta.items()})

    def __str__(self):
        return ("best f = %.10g at x = %s\n%d evaluations, %d restarts, terminated: %s"
                % (self.f, np.array2string(self.x, precision=8), self.nf, len(self.restarts), self.reason))


def _finite_or_inf(v):
    v = np.asarray(v, dtype=float)
    return np.where(np.isfinite(v), v, np.inf)


class _Evaluator:
    """Counts calls, enforces the budget and records every evaluation."""

    def __init__(self, objective, box: Optional[ScaledBox], max_evals: int):
        self.objective = objective
        self.box = box
        self.max_evals = max_evals
        self.xs: List[np.ndarray] = []
        self.fs: List[float] = []
        self.best_f = np.inf
        self.best_x = None
        self.tag = "step"
        self.sources: List[str] = []

    @property
    def count(self):
        return len(self.fs)

    def user_point(self, u):
        return u.copy() if self.box is None else self.box.from_unit(u)

    def __call__(self, u) -> float:
        if self.count >= self.max_evals:
            raise BudgetExhausted
        x = self.user_point(np.asarray(u, float))
        f = float(self.objective(x))
        if not np.isfinite(f):
            f = np.inf
        self.xs.append(x)
        self.fs.append(f)
        self.sources.append(self.tag)
        if f < self.best_f or self.best_x is None:
            self.best_f = f
            self.best_x = x
        return f


@dataclass
class SolverState:
    iset: InterpolationSet
    delta: float
    delta0: float
    options: SolverOptions
    lower: np.ndarray
    upper: np.ndarray
    delta_reset: Optional[float] = None
    model: Optional[QuadraticModel] = None
    eval_ids: Optional[np.ndarray] = None
    evaluate: Optional[Callable] = None
    rng: Optional[np.random.Generator] = None
    restart_count: int = 0
    consecutive_failed_restarts: int = 0
    total_failed_restarts: int = 0
    segment_start_best: Optional[float] = None
    restarts: List[RestartRecord] = field(default_factory=list)
    iterate_indices: List[int] = field(default_factory=list)
    f_history: deque = field(default_factory=lambda: deque(maxlen=1000))
    grad_changes: deque = field(default_factory=lambda: deque(maxlen=50))
    hess_changes: deque = field(default_factory=lambda: deque(maxlen=50))
    radius_decreased: deque = field(default_factory=lambda: deque(maxlen=50))
    best_value_overall: float = np.inf
    best_point_overall: Optional[np.ndarray] = None

    def __post_init__(self):
        if self.delta_reset is None:
            self.delta_reset = self.delta0
        if self.eval_ids is None:
            self.eval_ids = np.full(self.iset.p, -1, dtype=int)
        if self.model is None:
            self.model = QuadraticModel.zero(self.iset.n)
        self._note_best()

    @property
    def n(self):
        return self.iset.n

    @property
    def x_k(self):
        return self.iset.base_point

    @property
    def f_k(self):
        return self.iset.base_value

    @property
    def eval_count(self):
        return self.evaluate.count if self.evaluate is not None else 0

    @property
    def bounds(self):
        return self.lower, self.upper

    def _note_best(self):
        vals = _finite_or_inf(self.iset.values)
        t = int(np.argmin(vals))
        if vals[t] < self.best_value_overall:
            self.best_value_overall = float(vals[t])
            self.best_point_overall = self.iset.points[t].copy()

    def replace_point(self, t, y, fy):
        self.iset = self.iset.replace(t, y, fy)
        self.eval_ids[t] = self.evaluate.count - 1 if self.evaluate is not None else -1
        self._note_best()

    def set_base(self, t):
        if t != self.iset.base_index:
            self.iset = self.iset.with_base(t)
            if self.eval_ids[t] >= 0:
                self.iterate_indices.append(int(self.eval_ids[t]))

    def reset_history(self):
        self.f_history.clear()
        self.grad_changes.clear()
        self.hess_changes.clear()
        self.radius_decreased.clear()
        self.f_history.append(self.f_k)


# -- small pieces -----------------------------------------------------------

def ratio(f_old, f_new, m0, ms, tol=0.0) -> Optional[float]:
    """Actual over predicted decrease; None when the prediction is not positive."""
    pred = m0 - ms
    if not pred > tol:
        return None
    if not np.isfinite(f_new):
        return -np.inf
    return (f_old - f_new) / pred


def update_reset_radius(state: SolverState, restart_made_progress: bool, options: SolverOptions) -> float:
    """Record the outcome of the previous restart and return the next delta_reset."""
    if restart_made_progress:
        state.consecutive_failed_restarts = 0
    else:
        state.consecutive_failed_restarts += 1
        state.total_failed_restarts += 1
        if options.restart_radius_mode == "adaptive":
            state.delta_reset = options.adaptive_factor * state.delta_reset
    if options.restart_radius_mode == "fixed":
        state.delta_reset = state.delta0
    diam = float(np.linalg.norm(state.upper - state.lower))
    if np.isfinite(diam):
        state.delta_reset = min(state.delta_reset, max(diam, state.delta0))
    return state.delta_reset


def _lsq_slope(y):
    y = np.asarray(y, float)
    t = np.arange(y.size) - (y.size - 1) / 2.0
    return float(t @ (y - y.mean()) / (t @ t))


def check_restart_triggers(state: SolverState, options: SolverOptions) -> Optional[str]:
    """First firing trigger, in order: radius_small, slow_decrease, noise_level, diverging_model."""
    if state.delta <= options.rho_end:
        return "radius_small"
    w = options.slow_window if options.slow_window is not None else 5 * (state.n + 1)
    hist = state.f_history
    if len(hist) > w:
        old, new = hist[-w - 1], hist[-1]
        if np.isfinite(new) and old - new < options.slow_threshold * (1 + abs(new)):
            return "slow_decrease"
    if options.noise_aware:
        if options.noise_level is not None:
            vals = state.iset.values
            if np.all(np.isfinite(vals)) and np.max(vals) - np.min(vals) <= options.noise_level:
                return "noise_level"
        k = options.diverging_window
        if len(state.radius_decreased) >= k and len(state.grad_changes) >= k and len(state.hess_changes) >= k:
            if all(list(state.radius_decreased)[-k:]):
                gl = np.log(np.maximum(list(state.grad_changes)[-k:], 1e-300))
                hl = np.log(np.maximum(list(state.hess_changes)[-k:], 1e-300))
                if _lsq_slope(gl) > 0 and _lsq_slope(hl) > 0:
                    return "diverging_model"
    return None


_FINAL_REASON = {"radius_small": "radius_floor", "slow_decrease": "slow_decrease_final",
                 "noise_level": "noise_floor"}


def check_termination(state: SolverState, options: SolverOptions) -> Optional[str]:
    if state.evaluate is not None and state.eval_count >= state.evaluate.max_evals:
        return "budget"
    if options.objective_target is not None and state.best_value_overall <= options.objective_target:
        return "target_value"
    if options.restart_mode == "none":
        trig = check_restart_triggers(state, options)
        return _FINAL_REASON.get(trig)
    if (state.consecutive_failed_restarts >= options.max_consecutive_failed_restarts
            or state.total_failed_restarts >= options.max_total_failed_restarts):
        return "restart_limit"
    return None


def _use_objective(state: SolverState, objective):
    """Route evaluations to ``objective`` while keeping the count and trace."""
    if objective is None:
        return
    if isinstance(state.evaluate, _Evaluator):
        state.evaluate.objective = objective
    else:
        state.evaluate = _Evaluator(objective, None, np.iinfo(np.int64).max)


def _call(state: SolverState, y, tag: str) -> float:
    ev = state.evaluate
    ev.tag = tag
    return ev(y)


# -- model maintenance ------------------------------------------------------

def _poisedness_estimate(iset, basis, center, radius, lower, upper):
    """Cheap per-polynomial lower estimate of max |ell_t| over the ball and box."""
    shift = center - iset.base_point
    c = basis.values(shift)
    G = basis.g + basis.hess_vec(shift)
    gn = np.linalg.norm(G, axis=1)
    gn[gn == 0] = 1.0
    est = np.abs(c)
    slo, shi = lower - center, upper - center
    for sign in (1.0, -1.0):
        S = np.clip(sign * radius * G / gn[:, None], slo, shi)
        v = c + np.sum(G * S, axis=1) + 0.5 * basis.curvature(S)
        est = np.maximum(est, np.abs(v))
    return est


def _geometry_bad(state: SolverState) -> bool:
    opts = state.options
    dist = state.iset.distances()
    if np.max(dist) > opts.geometry_distance_factor * state.delta:
        return True
    basis = lagrange_basis(state.iset, cond_limit=None)
    est = _poisedness_estimate(state.iset, basis, state.x_k, state.delta, state.lower, state.upper)
    return bool(np.max(est) > opts.poisedness_limit)


def _improve_geometry(state: SolverState, radius: float):
    """Replace one point by a geometry-improving point in B(x_k, radius); costs one evaluation."""
    iset = state.iset
    opts = state.options
    basis = lagrange_basis(iset, cond_limit=None)
    dist = iset.distances()
    cand = [t for t in range(iset.p) if t != iset.base_index]
    far = [t for t in cand if dist[t] > opts.geometry_distance_factor * radius]
    if far:
        t = max(far, key=lambda i: dist[i])
    else:
        est = _poisedness_estimate(iset, basis, state.x_k, radius, state.lower, state.upper)
        est = est * np.maximum(1.0, (dist / radius) ** 2)
        t = max(cand, key=lambda i: est[i])
    y = geometry_point(iset, t, state.x_k, radius, state.bounds, basis=basis, rng=state.rng)
    fy = _call(state, y, "geometry")
    state.replace_point(t, y, fy)
    if fy < state.f_k:
        state.set_base(t)


def _refresh_model(state: SolverState):
    """Rebuild the model; repair the geometry first if the system is ill-conditioned."""
    prev = state.model
    for _ in range(state.iset.p + 1):
        try:
            model = solve_interpolation(state.iset, prev.H)
            break
        except PoorGeometryError:
            logger.debug("ill-conditioned interpolation system, repairing geometry")
            _improve_geometry(state, state.delta)
    else:
        model = solve_interpolation(state.iset, prev.H, cond_limit=None)
    return _set_model(state, model, prev)


def _set_model(state, model, prev):
    shift = state.x_k - getattr(state, "_model_base", state.x_k)
    g_prev = prev.gradient_at(shift) if prev is not None else model.g
    state.grad_changes.append(float(np.linalg.norm(model.g - g_prev)))
    state.hess_changes.append(float(np.linalg.norm(model.H - prev.H)))
    state.model = model
    state._model_base = state.x_k.copy()
    return model


# -- one iteration ----------------------------------------------------------

def iterate(state: SolverState, objective: Optional[Callable] = None) -> str:
    """One pass of the main loop; returns the phase taken.

    ``objective`` defaults to the state's own evaluator.
    """
    _use_objective(state, objective)
    opts = state.options
    model = state.model
    x_k = state.x_k.copy()
    f_k = state.f_k
    delta = state.delta
    s = solve_trs(TrsProblem(model, delta, state.lower - x_k, state.upper - x_k))
    snorm = float(np.linalg.norm(s))
    pred = model_decrease(model.g, model.H, s)
    gamma = opts.shrink_factor()

    if snorm < 0.5 * delta or not pred > 1e-15 * max(1.0, abs(f_k)):
        state.delta = max(gamma * delta, snorm) if snorm < 0.5 * delta else gamma * delta
        state.delta = min(state.delta, delta)
        _improve_geometry(state, state.delta)
        _after_iteration(state, decreased=True)
        return "safety"

    y = np.clip(x_k + s, state.lower, state.upper)
    f_new = _call(state, y, "step")
    r = ratio(f_k, f_new, 0.0, -pred)

    if r is not None and r >= ACCEPT_RATIO:
        phase = "successful"
        state.delta = min(opts.radius_increase * delta, opts.max_radius_factor * state.delta0)
        new_center = y
    elif _geometry_bad(state):
        phase = "model_improve"
        state.delta = gamma * delta
        new_center = x_k
    else:
        phase = "unsuccessful"
        state.delta = gamma * delta
        new_center = x_k

    t = select_replacement_index(state.iset, y, new_center, delta)
    state.replace_point(t, y, f_new)
    if phase == "successful" or f_new < state.f_k:
        state.set_base(t)
    if phase == "model_improve":
        _improve_geometry(state, state.delta)
    _after_iteration(state, decreased=state.delta < delta)
    return phase


def _after_iteration(state: SolverState, decreased: bool):
    state.radius_decreased.append(bool(decreased))
    _refresh_model(state)
    state.f_history.append(state.f_k)


# -- restarts ---------------------------------------------------------------

def _begin_restart(state: SolverState, trigger: str, kind: str):
    rec = RestartRecord(trigger, kind, float(state.delta_reset), state.eval_count, state.best_value_overall)
    state.restarts.append(rec)
    state.restart_count += 1
    state.segment_start_best = state.best_value_overall
    return rec


def hard_restart(state: SolverState, objective: Optional[Callable] = None, trigger: str = "manual") -> SolverState:
    """Rebuild the whole interpolation set around x_k with radius delta_reset."""
    _use_objective(state, objective)
    _begin_restart(state, trigger, "hard")
    x_k, f_k = state.x_k.copy(), state.f_k
    keep = not state.options.noise_aware
    start = state.eval_count
    ids = []

    def ev(y):
        f = _call(state, y, "restart")
        ids.append(state.eval_count - 1)
        return f

    p = state.iset.p
    iset = build_initial_set(x_k, state.delta_reset, p, state.bounds, evaluate=ev, f0=f_k if keep else None)
    old_id = state.eval_ids[state.iset.base_index]
    state.iset = iset
    state.eval_ids = np.array(([old_id] if keep else []) + ids, dtype=int)
    assert state.eval_count - start == (p - 1 if keep else p)
    state.delta = state.delta_reset
    state.model = QuadraticModel.zero(state.n)
    state._model_base = state.x_k.copy()
    state._note_best()
    best = int(np.argmin(_finite_or_inf(iset.values)))
    state.set_base(best)
    _refresh_model(state)
    state.reset_history()
    return state


def soft_restart(state: SolverState, objective: Optional[Callable] = None, N: Optional[int] = None,
                 trigger: str = "manual") -> SolverState:
    """Move x_k and the N-1 points nearest the old x_k to geometry-improving points."""
    _use_objective(state, objective)
    N = state.options.soft_moves(state.n) if N is None else int(N)
    if not 1 <= N <= state.iset.p:
        raise ValueError("N must lie in [1, p]")
    _begin_restart(state, trigger, "soft")
    radius = state.delta_reset
    old_x = state.x_k.copy()
    t0 = state.iset.base_index
    dist_old = state.iset.distances(old_x)
    others = [t for t in np.argsort(dist_old, kind="stable") if t != t0][: N - 1]

    y = geometry_point(state.iset, t0, old_x, radius, state.bounds, rng=state.rng, check_conditioning=False)
    state.replace_point(t0, y, _call(state, y, "restart"))
    center = y.copy()
    moved = [t0]
    for t in others:
        y = geometry_point(state.iset, int(t), center, radius, state.bounds, rng=state.rng, check_conditioning=False)
        state.replace_point(int(t), y, _call(state, y, "restart"))
        moved.append(int(t))
    best = min(moved, key=lambda i: state.iset.values[i])
    state.iset = state.iset.with_base(best)
    state.iterate_indices.append(int(state.eval_ids[best]))
    state.delta = radius
    _refresh_model(state)
    state.reset_history()
    return state


def _restart(state: SolverState, trigger: str):
    opts = state.options
    if state.restart_count > 0:
        progress = state.segment_start_best - state.best_value_overall > PROGRESS_TOL
        state.restarts[-1].f_after = state.best_value_overall
        update_reset_radius(state, progress, opts)
        if check_termination(state, opts) == "restart_limit":
            return False
    logger.debug("restart %d (%s), delta_reset=%g", state.restart_count + 1, trigger, state.delta_reset)
    if opts.restart_mode == "hard":
        hard_restart(state, trigger=trigger)
    else:
        soft_restart(state, trigger=trigger)
    return True


# -- driver -----------------------------------------------------------------

def init_state(objective: Callable, x0, bounds=None, options: Optional[SolverOptions] = None) -> SolverState:
    """Validate inputs, scale the box if requested and build the initial set and model.

    Raises BudgetExhausted if the budget runs out while building the set;
    the evaluations made so far are on the evaluator passed along with it.
    """
    opts = SolverOptions() if options is None else options
    x0 = np.asarray(x0, dtype=float).ravel()
    n = x0.size
    if not np.all(np.isfinite(x0)):
        raise ValueError("x0 must be finite")
    opts.validate(n)
    p = opts.npt(n)
    lower = np.full(n, -np.inf) if bounds is None else np.broadcast_to(np.asarray(bounds[0], float), (n,)).copy()
    upper = np.full(n, np.inf) if bounds is None else np.broadcast_to(np.asarray(bounds[1], float), (n,)).copy()
    if np.any(x0 < lower) or np.any(x0 > upper):
        raise ValueError("x0 must lie within the bounds")
    scale = opts.scale_to_unit_box
    if scale is None:
        scale = bounds is not None and np.all(np.isfinite(lower)) and np.all(np.isfinite(upper))
    box = scale_problem(lower, upper) if scale else None
    if box is not None:
        u0, lo, hi = box.to_unit(x0), np.zeros(n), np.ones(n)
    else:
        u0, lo, hi = x0, lower, upper
    delta0 = opts.delta0
    if delta0 is None:
        delta0 = 0.1 if box is not None else 0.1 * max(np.max(np.abs(x0)), 1.0)
    if not delta0 > opts.rho_end > 0:
        raise ValueError("need delta0 > rho_end > 0")
    max_evals = opts.max_evals if opts.max_evals is not None else 1000 * (n + 1)
    if max_evals < 1:
        raise ValueError("budget must be positive")

    ev = _Evaluator(objective, box, max_evals)
    ev.tag = "init"
    try:
        iset = build_initial_set(u0, delta0, p, (lo, hi), evaluate=ev)
    except BudgetExhausted as exc:
        exc.evaluator = ev
        raise
    state = SolverState(iset, delta0, delta0, opts, lo, hi, evaluate=ev, rng=np.random.default_rng(opts.rng_seed),
                        eval_ids=np.arange(p, dtype=int))
    state.iterate_indices.append(0)
    state.set_base(int(np.argmin(_finite_or_inf(iset.values))))
    state._model_base = state.x_k.copy()
    _refresh_model(state)
    state.reset_history()
    return state


def minimize(objective: Callable, x0, bounds=None, options: Optional[SolverOptions] = None) -> SolveResult:
    """Minimize a black-box objective from x0, optionally within box bounds.

    Every evaluation is recorded in call order (``xs``/``fs``); the returned
    point is the best seen over the whole run, restarts included.
    """
    opts = SolverOptions() if options is None else options
    reason = None
    state = None
    try:
        state = init_state(objective, x0, bounds, opts)
        ev = state.evaluate
        while True:
            reason = check_termination(state, opts)
            if reason is not None:
                break
            if opts.restart_mode != "none":
                trig = check_restart_triggers(state, opts)
                if trig is not None:
                    if not _restart(state, trig):
                        reason = "restart_limit"
                        break
                    continue
            iterate(state)
    except BudgetExhausted as exc:
        reason = getattr(exc, "reason", "budget")
        ev = state.evaluate if state is not None else exc.evaluator
    if state is not None and state.restarts and state.restarts[-1].f_after is None:
        state.restarts[-1].f_after = ev.best_f
    if ev.count == 0:
        raise RuntimeError("no evaluations were made")
    k = int(np.argmin(_finite_or_inf(ev.fs)))
    return SolveResult(
        x=ev.xs[k].copy(),
        f=float(ev.fs[k]),
        nf=ev.count,
        reason=reason,
        restarts=list(state.restarts) if state is not None else [],
        xs=np.array(ev.xs),
        fs=np.array(ev.fs),
        iterate_indices=list(state.iterate_indices) if state is not None else [0],
        sources=list(ev.sources),
    )
