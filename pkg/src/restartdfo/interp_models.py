"""Underdetermined quadratic interpolation and interpolation-set geometry.

Models are ``m(s) = c + g.s + 0.5 s.H.s`` with ``s`` measured from the
set's base point. When fewer than ``(n+1)(n+2)/2`` points are available the
remaining freedom is fixed by minimizing ``||H - H_prev||_F`` (BOBYQA style),
solved directly from the KKT system each time.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from functools import cached_property
from typing import Optional, Sequence

import numpy as np
import scipy.linalg as sla

from .trs import trsbox

__all__ = [
    "COND_LIMIT",
    "PoorGeometryError",
    "InterpolationSet",
    "QuadraticModel",
    "LagrangeBasis",
    "build_initial_set",
    "initial_points",
    "solve_interpolation",
    "lagrange_basis",
    "poisedness",
    "geometry_point",
    "select_replacement_index",
    "replacement_merit",
    "kkt_condition_number",
]

COND_LIMIT = 1e10


class PoorGeometryError(np.linalg.LinAlgError):
    """The interpolation system is too ill-conditioned; improve the geometry."""

    def __init__(self, cond):
        self.cond = cond
        super().__init__("interpolation system condition number %.3g exceeds limit" % cond)


def max_points(n: int) -> int:
    return (n + 1) * (n + 2) // 2


def _check_p(n, p):
    if not n + 1 <= p <= max_points(n):
        raise ValueError("need n+1 <= p <= (n+1)(n+2)/2 (n=%d), got p=%d" % (n, p))


@dataclass(frozen=True)
class QuadraticModel:
    c: float
    g: np.ndarray
    H: np.ndarray

    def __call__(self, s):
        s = np.asarray(s, dtype=float)
        if s.ndim == 1:
            return self.c + self.g @ s + 0.5 * s @ self.H @ s
        return self.c + s @ self.g + 0.5 * np.sum((s @ self.H) * s, axis=1)

    def gradient_at(self, s):
        return self.g + self.H @ np.asarray(s, dtype=float)

    def shifted(self, delta):
        """The same quadratic expanded around ``base + delta``."""
        delta = np.asarray(delta, dtype=float)
        return QuadraticModel(float(self(delta)), self.gradient_at(delta), self.H)

    @classmethod
    def zero(cls, n):
        return cls(0.0, np.zeros(n), np.zeros((n, n)))


@dataclass(frozen=True)
class InterpolationSet:
    """Points ``y_1..y_p``, their (possibly noisy) values and the base point index."""

    points: np.ndarray
    values: np.ndarray
    base_index: int = 0

    def __post_init__(self):
        pts = np.atleast_2d(np.asarray(self.points, dtype=float))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "values", np.asarray(self.values, dtype=float).reshape(-1))
        if self.values.shape[0] != pts.shape[0]:
            raise ValueError("points and values have different lengths")
        if not 0 <= self.base_index < pts.shape[0]:
            raise ValueError("base_index out of range")

    @property
    def p(self) -> int:
        return self.points.shape[0]

    @property
    def n(self) -> int:
        return self.points.shape[1]

    @property
    def base_point(self) -> np.ndarray:
        return self.points[self.base_index]

    @property
    def base_value(self) -> float:
        return float(self.values[self.base_index])

    @property
    def best_index(self) -> int:
        return int(np.argmin(np.where(np.isnan(self.values), np.inf, self.values)))

    def offsets(self, center=None) -> np.ndarray:
        center = self.base_point if center is None else center
        return self.points - center

    def distances(self, center=None) -> np.ndarray:
        return np.linalg.norm(self.offsets(center), axis=1)

    def replace(self, t, point, value) -> "InterpolationSet":
        pts = self.points.copy()
        vals = self.values.copy()
        pts[t] = point
        vals[t] = value
        return InterpolationSet(pts, vals, self.base_index)

    def with_base(self, index) -> "InterpolationSet":
        return InterpolationSet(self.points, self.values, int(index))

    @cached_property
    def _system(self):
        offsets = self.offsets()
        K, scale = _kkt(offsets)
        lu, piv, cond = _factor(K)
        return offsets, K, scale, lu, piv, cond


@dataclass(frozen=True)
class LagrangeBasis:
    """All p Lagrange polynomials, stacked.

    The Hessians are kept implicitly: ``H_t = sum_j mu[t, j] y_j y_j^T`` with
    ``y_j`` the interpolation offsets, so evaluating every polynomial costs
    O(p (p + n)) rather than O(p n^2).
    """

    c: np.ndarray  # (p,)
    g: np.ndarray  # (p, n)
    mu: np.ndarray  # (p, p)
    offsets: np.ndarray  # (p, n)
    base_point: np.ndarray

    @property
    def p(self) -> int:
        return self.c.shape[0]

    @cached_property
    def H(self) -> np.ndarray:
        """Dense (p, n, n) Hessian stack."""
        Y = self.offsets
        return np.matmul((self.mu[:, :, None] * Y[None]).transpose(0, 2, 1), Y)

    def hessian(self, t) -> np.ndarray:
        Y = self.offsets
        return (Y.T * self.mu[t]) @ Y

    def model(self, t) -> QuadraticModel:
        return QuadraticModel(float(self.c[t]), self.g[t], self.hessian(t))

    @property
    def models(self):
        return [self.model(t) for t in range(self.p)]

    def hess_vec(self, V) -> np.ndarray:
        """Row t of the result is H_t v_t (V has shape (p, n)) or H_t v (V of shape (n,))."""
        Y = self.offsets
        if np.ndim(V) == 1:
            return self.mu @ (Y * (Y @ V)[:, None])
        W = np.asarray(V, float) @ Y.T  # (p, p): v_t . y_j
        return (self.mu * W) @ Y

    def curvature(self, V) -> np.ndarray:
        """v_t^T H_t v_t for each row v_t of V."""
        W = np.asarray(V, float) @ self.offsets.T
        return np.sum(self.mu * W * W, axis=1)

    def values(self, s) -> np.ndarray:
        """ell_t(s) for all t; s is an offset from the base point, shape (n,) or (m, n)."""
        s = np.asarray(s, dtype=float)
        if s.ndim == 1:
            return self.c + self.g @ s + 0.5 * self.mu @ (self.offsets @ s) ** 2
        return self.c + s @ self.g.T + 0.5 * ((s @ self.offsets.T) ** 2) @ self.mu.T


# -- initial set ------------------------------------------------------------

def _bounds_arrays(n, bounds):
    if bounds is None:
        return np.full(n, -np.inf), np.full(n, np.inf)
    lo, hi = bounds
    return np.broadcast_to(np.asarray(lo, float), (n,)).copy(), np.broadcast_to(np.asarray(hi, float), (n,)).copy()


def initial_points(x0, delta0, p, bounds=None) -> np.ndarray:
    """Coordinate construction: +delta*e_i, then -delta*e_i, then pairs.

    A displacement that would leave the box is flipped; if the flip is also
    infeasible the second point on that axis sits halfway along the first,
    so every coordinate point stays inside the ball.
    """
    x0 = np.asarray(x0, dtype=float)
    n = x0.size
    _check_p(n, p)
    if not delta0 > 0:
        raise ValueError("initial radius must be positive")
    lo, hi = _bounds_arrays(n, bounds)
    if np.any(x0 < lo) or np.any(x0 > hi):
        raise ValueError("x0 must lie within the bounds")
    width = hi - lo
    if np.any(width <= 1e-12 * np.maximum(1.0, np.abs(x0))):
        raise ValueError("bounds box too narrow to hold distinct interpolation points")

    first = np.zeros(n)
    second = np.zeros(n)
    for i in range(n):
        if x0[i] + delta0 <= hi[i]:
            first[i] = delta0
        elif x0[i] - delta0 >= lo[i]:
            first[i] = -delta0
        else:
            first[i] = (hi[i] - x0[i]) if hi[i] - x0[i] >= x0[i] - lo[i] else (lo[i] - x0[i])
        opp = -first[i]
        second[i] = opp if lo[i] <= x0[i] + opp <= hi[i] else 0.5 * first[i]

    pts = [x0.copy()]
    for i in range(n):
        if len(pts) == p:
            break
        pts.append(x0 + first[i] * np.eye(n)[i])
    for i in range(n):
        if len(pts) == p:
            break
        pts.append(x0 + second[i] * np.eye(n)[i])
    if len(pts) < p:
        sgn = np.sign(first)
        for gap in range(1, n):
            for i in range(n - gap):
                if len(pts) == p:
                    break
                j = i + gap
                y = x0.copy()
                y[i] += sgn[i] * delta0
                y[j] += sgn[j] * delta0
                pts.append(np.clip(y, lo, hi))
    return np.array(pts)


def build_initial_set(x0, delta0, p, bounds=None, evaluate=None, f0=None) -> InterpolationSet:
    """Initial set around x0 (x0 is the base point, index 0).

    ``evaluate`` fills values for each new point in order; ``f0`` reuses an
    already known value at x0. Without ``evaluate`` the values are NaN.
    """
    pts = initial_points(x0, delta0, p, bounds)
    vals = np.full(p, np.nan)
    if f0 is not None:
        vals[0] = f0
    if evaluate is not None:
        for t in range(p):
            if not (t == 0 and f0 is not None):
                vals[t] = evaluate(pts[t])
    return InterpolationSet(pts, vals, 0)


# -- linear algebra ---------------------------------------------------------

def _kkt(offsets):
    """Scaled min-Frobenius KKT matrix and the scale used."""
    p, n = offsets.shape
    scale = float(np.max(np.linalg.norm(offsets, axis=1)))
    if scale == 0.0:
        scale = 1.0
    d = offsets / scale
    gram = d @ d.T
    A = 0.5 * gram**2
    X = np.hstack([np.ones((p, 1)), d])
    K = np.zeros((p + n + 1, p + n + 1))
    K[:p, :p] = A
    K[:p, p:] = X
    K[p:, :p] = X.T
    return K, scale


def _factor(K):
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        lu, piv = sla.lu_factor(K, check_finite=False)
    anorm = np.linalg.norm(K, 1)
    if not np.all(np.isfinite(lu)) or np.any(np.diag(lu) == 0.0):
        return lu, piv, np.inf
    rcond, info = sla.lapack.dgecon(lu, anorm, norm="1")
    cond = np.inf if rcond <= 0 else 1.0 / rcond
    return lu, piv, cond


def kkt_condition_number(iset: InterpolationSet) -> float:
    """Estimated 1-norm condition number of the scaled interpolation system."""
    return iset._system[5]


def _solve_kkt(iset: InterpolationSet, rhs, cond_limit):
    """Solve with the set's cached factorization; returns (c, g, mu) in unscaled offsets."""
    offsets, K, scale, lu, piv, cond = iset._system
    p, n = offsets.shape
    if cond_limit is not None and cond > cond_limit:
        raise PoorGeometryError(cond)
    full_rhs = np.zeros((p + n + 1,) + rhs.shape[1:])
    full_rhs[:p] = rhs
    if np.isfinite(cond):
        sol = sla.lu_solve((lu, piv), full_rhs, check_finite=False)
    else:
        sol = np.linalg.lstsq(K, full_rhs, rcond=None)[0]
    # K was built from offsets / scale: undo that for g and the multipliers
    return sol[p], sol[p + 1:] / scale, sol[:p] / scale**4


def solve_interpolation(iset: InterpolationSet, prev_hessian=None, cond_limit: Optional[float] = COND_LIMIT) -> QuadraticModel:
    """Minimum-Frobenius-change quadratic interpolant of the set.

    Raises PoorGeometryError when the scaled KKT system's condition number
    exceeds ``cond_limit`` (pass None to solve regardless).
    """
    n = iset.n
    _check_p(n, iset.p)
    Hp = np.zeros((n, n)) if prev_hessian is None else np.asarray(prev_hessian, dtype=float)
    offsets = iset.offsets()
    resid = iset.values - 0.5 * np.sum((offsets @ Hp) * offsets, axis=1)
    c, g, mu = _solve_kkt(iset, resid, cond_limit)
    H = Hp + (offsets.T * mu) @ offsets
    H = 0.5 * (H + H.T)
    return QuadraticModel(float(c), g, H)


def lagrange_basis(iset: InterpolationSet, cond_limit: Optional[float] = COND_LIMIT) -> LagrangeBasis:
    """Minimum-Frobenius-norm Lagrange polynomials (previous Hessian zero)."""
    _check_p(iset.n, iset.p)
    if cond_limit is not None and iset._system[5] > cond_limit:
        raise PoorGeometryError(iset._system[5])
    cached = iset.__dict__.get("_basis")
    if cached is None:
        c, g, mu = _solve_kkt(iset, np.eye(iset.p), None)
        cached = LagrangeBasis(np.asarray(c, float), np.ascontiguousarray(g.T), np.ascontiguousarray(mu.T),
                               iset.offsets(), iset.base_point.copy())
        iset.__dict__["_basis"] = cached
    return cached


# -- geometry ---------------------------------------------------------------

def _shifted_bounds(center, bounds, n):
    lo, hi = _bounds_arrays(n, bounds)
    return lo - center, hi - center


def _abs_max_trs(model: QuadraticModel, radius, slo, shi):
    """Candidate steps that approximately maximize |model| over ball and box."""
    out = []
    for sign in (1.0, -1.0):
        out.append(trsbox(-sign * model.g, -sign * model.H, radius, slo, shi))
    return out


def _line_candidates(model: QuadraticModel, directions, radius, slo, shi):
    """Maximize |q(a)| for q(a) = model(a*u) over feasible a along each direction."""
    U = np.asarray(directions, dtype=float).reshape(-1, model.g.size)
    nu = np.linalg.norm(U, axis=1)
    U = U[nu > 0] / nu[nu > 0, None]
    if U.shape[0] == 0:
        return []
    with np.errstate(divide="ignore", invalid="ignore"):
        up = np.where(U > 0, shi / U, np.where(U < 0, slo / U, np.inf))
        dn = np.where(U > 0, slo / U, np.where(U < 0, shi / U, -np.inf))
    a_hi = np.minimum(np.min(up, axis=1), radius)
    a_lo = np.maximum(np.max(dn, axis=1), -radius)
    ok = a_hi >= a_lo
    U, a_hi, a_lo = U[ok], a_hi[ok], a_lo[ok]
    b = U @ model.g
    curv = np.sum((U @ model.H) * U, axis=1)
    with np.errstate(divide="ignore", invalid="ignore"):
        a_st = np.where(curv != 0, -b / curv, a_lo)
    a_st = np.where((a_st > a_lo) & (a_st < a_hi), a_st, a_lo)
    alphas = np.stack([a_lo, a_hi, a_st], axis=1)
    vals = np.abs(model.c + b[:, None] * alphas + 0.5 * curv[:, None] * alphas**2)
    pick = alphas[np.arange(len(U)), np.argmax(vals, axis=1)]
    return list(pick[:, None] * U)


def poisedness(iset: InterpolationSet, center=None, radius=1.0, bounds=None, basis: Optional[LagrangeBasis] = None,
               cond_limit: Optional[float] = None) -> float:
    """Approximate Lambda: max over t and y in the ball (and box) of |ell_t(y)|.

    Each |ell_t| is maximized by trust-region solves for +ell_t and -ell_t;
    interpolation points inside the ball are also checked, so the result is
    at least 1 whenever Y lies in the ball. Nearly degenerate sets are
    measured rather than rejected unless ``cond_limit`` is given.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    basis = lagrange_basis(iset, cond_limit) if basis is None else basis
    n = iset.n
    center = iset.base_point if center is None else np.asarray(center, float)
    shift = center - iset.base_point
    slo, shi = _shifted_bounds(center, bounds, n)
    lam = 0.0
    inside = iset.distances(center) <= radius * (1 + 1e-12)
    if np.any(inside):
        lam = float(np.max(np.abs(basis.values(iset.offsets()[inside]))))
    for model in basis.models:
        local = model.shifted(shift)
        for s in _abs_max_trs(local, radius, slo, shi):
            lam = max(lam, abs(local(s)))
    return lam


def geometry_point(iset: InterpolationSet, t: int, center, radius, bounds=None,
                   basis: Optional[LagrangeBasis] = None, rng: Optional[np.random.Generator] = None,
                   check_conditioning: bool = True) -> np.ndarray:
    """A point in B(center, radius) and the box approximately maximizing |ell_t|.

    Candidates come from trust-region solves on +/-ell_t, line searches
    towards the other interpolation points and along coordinate axes, and
    (with ``rng``) random directions. The best candidate whose insertion does
    not worsen the conditioning of the system is returned; if none qualifies
    the largest-|ell_t| candidate is used.
    """
    if not radius > 0:
        raise ValueError("radius must be positive")
    n = iset.n
    center = np.asarray(center, float)
    basis = lagrange_basis(iset, cond_limit=None) if basis is None else basis
    local = basis.model(t).shifted(center - iset.base_point)
    slo, shi = _shifted_bounds(center, bounds, n)

    cands = _abs_max_trs(local, radius, slo, shi)
    dirs = [y - center for y in iset.points] + list(np.eye(n))
    if rng is not None:
        dirs += list(rng.standard_normal((2 * n, n)))
    cands += _line_candidates(local, dirs, radius, slo, shi)
    cands = np.array(cands)
    # guard against roundoff at the ball/box boundary
    norms = np.linalg.norm(cands, axis=1)
    over = norms > radius
    cands[over] *= (radius / norms[over])[:, None]
    cands = np.clip(cands, slo, shi)
    score = np.abs(local(cands))
    order = np.argsort(-score, kind="stable")
    best = center + cands[order[0]]
    if not check_conditioning:
        return best

    before = kkt_condition_number(iset)
    for k in order[:4]:
        y = center + cands[k]
        after = kkt_condition_number(iset.replace(t, y, iset.values[t]))
        if after <= before * (1 + 1e-8) or not np.isfinite(before):
            return y
    return best


def replacement_merit(lagrange_values, distances, radius, exclude: Sequence[int] = ()) -> int:
    """Index maximizing |ell_t(new)| * max(1, (dist_t / radius)^4), skipping ``exclude``."""
    lv = np.abs(np.asarray(lagrange_values, float))
    w = np.maximum(1.0, (np.asarray(distances, float) / radius) ** 4)
    merit = lv * w
    if not np.any(merit > 0):
        merit = w.copy()
    merit[list(exclude)] = -np.inf
    return int(np.argmax(merit))


def select_replacement_index(iset: InterpolationSet, new_point, new_center, radius,
                             basis: Optional[LagrangeBasis] = None) -> int:
    """Which point leaves the set when ``new_point`` enters.

    Never returns the index of the best-valued point or of ``new_center``
    if it is a set member.
    """
    basis = lagrange_basis(iset, cond_limit=None) if basis is None else basis
    lv = basis.values(np.asarray(new_point, float) - iset.base_point)
    dist = iset.distances(np.asarray(new_center, float))
    exclude = {iset.best_index}
    at_center = np.flatnonzero(dist == 0.0)
    exclude.update(int(i) for i in at_center)
    return replacement_merit(lv, dist, radius, sorted(exclude))
