"""Trust-region subproblem with optional box constraints.

Approximately minimizes ``g.s + 0.5 s.H.s`` subject to ``||s|| <= radius``
and ``lower <= s <= upper`` using truncated conjugate gradients. Box
constraints are handled by fixing variables as they hit a bound and
restarting CG on the remaining free variables.
"""
from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Optional

import numpy as np

__all__ = ["TrsProblem", "solve_trs", "trsbox", "model_decrease", "projected_gradient"]


@dataclass(frozen=True)
class TrsProblem:
    """A quadratic model (anything with ``g`` and ``H``), a radius and shifted bounds."""

    model: Any
    radius: float
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("trust-region radius must be positive, got %r" % self.radius)
        lo, hi = _box(len(self.model.g), self.lower, self.upper)
        if np.any(lo > 0) or np.any(hi < 0):
            raise ValueError("s = 0 must be feasible for the shifted bounds")


def solve_trs(problem: TrsProblem) -> np.ndarray:
    return trsbox(problem.model.g, problem.model.H, problem.radius, problem.lower, problem.upper)


def model_decrease(g, H, s) -> float:
    """m(0) - m(s) for the model with gradient g and Hessian H."""
    return -(g @ s + 0.5 * s @ (H @ s))


def projected_gradient(g, lower=None, upper=None) -> np.ndarray:
    """Criticality vector at s = 0: ``-P(-g)`` with P the projection onto the box."""
    lo, hi = _box(len(g), lower, upper)
    return -np.clip(-np.asarray(g, dtype=float), lo, hi)


def _box(n, lower, upper):
    lo = np.full(n, -np.inf) if lower is None else np.asarray(lower, dtype=float)
    hi = np.full(n, np.inf) if upper is None else np.asarray(upper, dtype=float)
    return lo, hi


def _step_to_ball(s, d, delta):
    dd = d @ d
    sd = s @ d
    gap = max(delta * delta - s @ s, 0.0)
    return gap / (sd + np.sqrt(sd * sd + dd * gap)) if sd > 0 else (-sd + np.sqrt(sd * sd + dd * gap)) / dd


def _step_to_box(s, d, lo, hi, free):
    alpha, idx = np.inf, -1
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(free & (d > 0), (hi - s) / d, np.inf)
        dn = np.where(free & (d < 0), (lo - s) / d, np.inf)
    steps = np.minimum(up, dn)
    if steps.size:
        idx = int(np.argmin(steps))
        alpha = max(float(steps[idx]), 0.0)
    return alpha, idx


def _cauchy_step(g, H, delta, lo, hi):
    d = np.clip(-g, lo, hi)
    dn = np.linalg.norm(d)
    if dn == 0.0:
        return np.zeros_like(g)
    t_max = min(1.0, delta / dn)
    slope = -(g @ d)
    curv = d @ (H @ d)
    t = t_max if curv <= 0 else min(t_max, slope / curv)
    return t * d


def trsbox(g, H, delta, lower=None, upper=None) -> np.ndarray:
    """Truncated CG for the box- and ball-constrained quadratic subproblem.

    Returns the better (by model value) of the CG point and the projected
    Cauchy point, so the result always achieves Cauchy decrease.
    """
    g = np.asarray(g, dtype=float)
    H = np.asarray(H, dtype=float)
    n = g.size
    lo, hi = _box(n, lower, upper)
    s = np.zeros(n)
    gnorm = np.linalg.norm(g)
    if gnorm == 0.0 and not np.any(H):
        return s

    tol = 1e-13 * max(gnorm, 1.0)
    fixed = ((lo >= 0) & (g > 0)) | ((hi <= 0) & (g < 0))
    grad = g.copy()
    activations = 0
    done = False
    while not done:
        free = ~fixed
        r = np.where(free, -grad, 0.0)
        rr = r @ r
        if np.sqrt(rr) <= tol:
            break
        d = r.copy()
        hit_bound = False
        for _ in range(int(free.sum())):
            Hd = H @ d
            dHd = d @ Hd
            a_tr = _step_to_ball(s, d, delta)
            a_box, ibox = _step_to_box(s, d, lo, hi, free)
            a_cg = rr / dHd if dHd > 0 else np.inf
            alpha = min(a_cg, a_tr, a_box)
            s = s + alpha * d
            grad = grad + alpha * Hd
            if alpha == a_box and a_box < a_tr:
                s[ibox] = hi[ibox] if d[ibox] > 0 else lo[ibox]
                fixed[ibox] = True
                activations += 1
                hit_bound = True
                break
            if alpha == a_tr:
                done = True
                break
            r = np.where(free, -grad, 0.0)
            rr_new = r @ r
            if np.sqrt(rr_new) <= tol:
                done = True
                break
            d = r + (rr_new / rr) * d
            rr = rr_new
        else:
            done = True
        if not hit_bound or activations > n:
            done = True

    # keep strictly inside the ball despite roundoff
    sn = np.linalg.norm(s)
    if sn > delta:
        s *= delta / sn
    s = np.clip(s, lo, hi)

    sc = _cauchy_step(g, H, delta, lo, hi)
    if model_decrease(g, H, sc) > model_decrease(g, H, s):
        return sc
    return s
