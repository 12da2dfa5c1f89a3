"""One-dimensional robust location under the quadratic redescending loss.

The coordinate-wise aggregate of the per-node debiased coefficients is the
minimiser of ``sum_k w_k min((v_k - x)^2, eta^2)``.  The objective is a
piecewise quadratic whose pieces are indexed by the set of inliers
``{k : |v_k - x| <= eta}``; that set is always a contiguous run of the sorted
values spanning at most ``2 eta``, so the global minimiser is the weighted
mean of one such run.  :func:`aggregate_location` enumerates them.

Baseline identifications (mean, weighted median, Huber, median plus ridge)
and a check of the cluster conditions under which the minimiser is unique
live here as well.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np
from scipy import optimize

from . import kernels
from .model import ALPHA_MAX, AggregationSpec, DomainError, LocalSummary, validate_spec

TIE_TOL = 1e-12


def psi(x, eta):
    """Quadratic redescending loss ``min(x**2, eta**2)``."""
    if not np.all(np.asarray(eta) > 0):
        raise DomainError("eta must be positive")
    x = np.asarray(x, dtype=np.float64)
    out = np.minimum(x * x, np.asarray(eta, dtype=np.float64) ** 2)
    return float(out) if out.ndim == 0 else out


@dataclass(frozen=True, eq=False)
class LocationProblem:
    values: np.ndarray
    weights: np.ndarray
    eta: float

    def __post_init__(self):
        v = np.array(self.values, dtype=np.float64).ravel()
        w = np.ones_like(v) if self.weights is None else np.array(self.weights, dtype=np.float64).ravel()
        object.__setattr__(self, "values", v)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "eta", float(self.eta))
        if v.size == 0:
            raise DomainError("location problem needs at least one value")
        if w.shape != v.shape:
            raise DomainError("weights and values differ in length")
        if not np.all(np.isfinite(v)):
            raise DomainError("values must be finite")
        if not np.all(w > 0):
            raise DomainError("weights must be positive")
        if not self.eta > 0:
            raise DomainError("eta must be positive")

    @classmethod
    def of(cls, values, weights=None, eta=1.0) -> "LocationProblem":
        return cls(values=values, weights=weights, eta=eta)

    def objective(self, x) -> float:
        return float(np.sum(self.weights * psi(self.values - x, self.eta)))


@dataclass(frozen=True, eq=False)
class LocationSolution:
    minimizer: float
    objective: float
    inlier_set: tuple
    unique: bool


def aggregate_location(p: LocationProblem) -> LocationSolution:
    """Global minimiser of the weighted redescending objective.

    Candidates are the weighted means of every contiguous sorted window of
    span at most ``2 eta`` together with ``v_k`` and ``v_k +- eta``.  When two
    distinct minima are within 1e-12 (relative) of each other the one with
    more inliers, then the smaller one, is returned and ``unique`` is False.
    """
    v, w, eta = p.values, p.weights, p.eta
    if v.size == 1:
        return LocationSolution(float(v[0]), 0.0, (0,), True)
    order = np.argsort(v, kind="stable")
    x, _, lo, hi, tie = kernels.redescending(v[order], w[order], eta, TIE_TOL)
    inliers = tuple(sorted(int(k) for k in np.flatnonzero(np.abs(v - x) <= eta)))
    return LocationSolution(float(x), p.objective(x), inliers, not tie)


def oracle_grid_min(p: LocationProblem, resolution: int = 4001):
    """Brute-force minimiser: a uniform grid plus ``v_k``, ``v_k +- eta``,
    refined by bounded Brent search around the best point.  Test oracle only.
    """
    if resolution < 1000:
        raise DomainError("oracle resolution must be >= 1000")
    v, eta = p.values, p.eta
    lo, hi = v.min() - eta, v.max() + eta
    grid = np.concatenate((np.linspace(lo, hi, resolution), v, v - eta, v + eta))
    r = p.values[None, :] - grid[:, None]
    f = (p.weights * np.minimum(r * r, eta * eta)).sum(axis=1)
    best = int(np.argmin(f))
    x0, f0 = float(grid[best]), float(f[best])
    h = max((hi - lo) / (resolution - 1), 1e-12)
    res = optimize.minimize_scalar(p.objective, bounds=(x0 - h, x0 + h), method="bounded",
                                   options={"xatol": 1e-12})
    if res.fun < f0:
        return float(res.x), float(res.fun)
    return x0, f0


# ---------------------------------------------------------------------------
# baselines
# ---------------------------------------------------------------------------

BASELINES = ("mean", "median", "huber", "median_ridge")


def weighted_median(values, weights) -> float:
    """Lower weighted median."""
    order = np.argsort(values, kind="stable")
    v, w = values[order], weights[order]
    cw = np.cumsum(w)
    k = int(np.searchsorted(cw, 0.5 * cw[-1] * (1 - 1e-15), side="left"))
    return float(v[min(k, v.size - 1)])


def huber_location(values, weights, lam: float) -> float:
    """Minimiser of sum_k w_k L_lam(x - v_k) for the Huber loss L_lam.

    The stationarity function sum_k w_k clip(x - v_k, -lam, lam) is
    non-decreasing and piecewise linear with breakpoints v_k +- lam; its zero
    is found by linear interpolation between bracketing breakpoints.  A flat
    zero stretch returns its midpoint.
    """
    b = np.sort(np.concatenate((values - lam, values + lam)))
    g = (weights[None, :] * np.clip(b[:, None] - values[None, :], -lam, lam)).sum(axis=1)
    first = int(np.argmax(g >= 0))
    if g[first] == 0:
        last = int(np.flatnonzero(g <= 0)[-1])
        return float(0.5 * (b[first] + b[last]))
    # g[first - 1] < 0 < g[first]; first >= 1 because g[0] = -lam * sum(w)
    g0, g1 = g[first - 1], g[first]
    return float(b[first - 1] - g0 * (b[first] - b[first - 1]) / (g1 - g0))


def median_ridge_location(values, weights, lam: float) -> float:
    """Minimiser of sum_k w_k (lam |v_k - x| + (v_k - x)^2 / 2).

    Scans sorted values: inside an open gap the subgradient is linear and its
    root is explicit; at a value the subdifferential is an interval.
    """
    u, inv = np.unique(values, return_inverse=True)
    wu = np.bincount(inv, weights=weights)
    W = wu.sum()
    swv = float(weights @ values)
    below = np.concatenate(([0.0], np.cumsum(wu)))  # weight strictly below u[i]
    for i in range(u.size + 1):
        # open gap (u[i-1], u[i]); below[i] is the weight to the left
        w_left = below[i]
        x = (swv - lam * (w_left - (W - w_left))) / W
        left_ok = i == 0 or x > u[i - 1]
        right_ok = i == u.size or x < u[i]
        if left_ok and right_ok:
            return float(x)
        if i < u.size:
            base = W * u[i] - swv
            w_b = below[i]
            w_a = W - below[i + 1]
            h_minus = base + lam * (w_b - wu[i] - w_a)
            h_plus = base + lam * (w_b + wu[i] - w_a)
            if h_minus <= 0.0 <= h_plus:
                return float(u[i])
    raise AssertionError("subgradient scan found no root")  # pragma: no cover


def baseline_location(method: str, values, weights=None, lam: Optional[float] = None) -> float:
    """Location under one of the baseline identifications.

    ``method`` is one of ``mean``, ``median``, ``huber`` or ``median_ridge``;
    the last two take the tuning parameter ``lam``.
    """
    values = np.asarray(values, dtype=np.float64).ravel()
    if values.size == 0:
        raise DomainError("baseline needs at least one value")
    weights = np.ones_like(values) if weights is None else np.asarray(weights, dtype=np.float64).ravel()
    if weights.shape != values.shape or not np.all(weights > 0):
        raise DomainError("weights must be positive and match values")
    if method not in BASELINES:
        raise DomainError(f"unknown baseline {method!r}")
    if method in ("huber", "median_ridge") and not (lam is not None and lam > 0):
        raise DomainError(f"{method} needs lam > 0")
    if values.size == 1:
        return float(values[0])
    if method == "mean":
        return float(np.average(values, weights=weights))
    if method == "median":
        return weighted_median(values, weights)
    if method == "huber":
        return huber_location(values, weights, float(lam))
    return median_ridge_location(values, weights, float(lam))


# ---------------------------------------------------------------------------
# cluster conditions
# ---------------------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class ClusterReport:
    holds: bool
    inliers: tuple
    mu: float
    delta: float
    delta2: float
    messages: list = field(default_factory=list)


def check_cluster_assumption(values, weights, eta: float, alpha_bound: float) -> ClusterReport:
    """Search sorted windows for an inlier bulk satisfying the cluster conditions.

    A window qualifies when it carries at least ``(1 - alpha)`` of the weight,
    no value lies in the annuli ``[mu-5d, mu-d)`` or ``(mu+d, mu+5d]`` around
    its weighted mean ``mu`` (``d`` its half-spread about ``mu``), and
    ``2 d < eta < d2 / 2`` with ``d2`` the gap to the nearest outlier.  The
    qualifying window of largest mass (then smallest ``d``) is reported.
    """
    v = np.asarray(values, dtype=np.float64).ravel()
    if v.size == 0:
        raise DomainError("cluster check needs at least one value")
    w = np.ones_like(v) if weights is None else np.asarray(weights, dtype=np.float64).ravel()
    messages = []
    if not (0.0 <= alpha_bound < ALPHA_MAX):
        messages.append("alpha outside [0, 3/7)")
    order = np.argsort(v, kind="stable")
    vs, ws = v[order], w[order]
    m = vs.size
    total = ws.sum()
    best = None
    has_mass = False
    for i in range(m):
        if i > 0 and vs[i - 1] == vs[i]:
            continue
        for k in range(i, m):
            if k + 1 < m and vs[k + 1] == vs[k]:
                continue
            mass = ws[i:k + 1].sum()
            if mass < (1.0 - alpha_bound) * total * (1 - 1e-12):
                continue
            has_mass = True
            mu = float(np.dot(ws[i:k + 1], vs[i:k + 1]) / mass)
            delta = float(np.max(np.abs(vs[i:k + 1] - mu)))
            outside = np.concatenate((vs[:i], vs[k + 1:]))
            gaps = []
            if i > 0:
                gaps.append(vs[i] - vs[i - 1])
            if k + 1 < m:
                gaps.append(vs[k + 1] - vs[k])
            delta2 = float(min(gaps)) if gaps else np.inf
            problems = []
            left = (outside >= mu - 5 * delta) & (outside < mu - delta)
            right = (outside > mu + delta) & (outside <= mu + 5 * delta)
            if np.any(left | right):
                problems.append("forbidden annulus occupied")
            if not 2 * delta < eta:
                problems.append("eta must exceed 2*delta strictly")
            if not eta < delta2 / 2:
                problems.append("eta must be below delta2/2")
            if problems:
                messages.extend(p for p in problems if p not in messages)
                continue
            key = (mass, -delta)
            if best is None or key > best[0]:
                best = (key, tuple(sorted(int(t) for t in order[i:k + 1])), mu, delta, delta2)
    if not has_mass:
        messages.append("no window carries (1 - alpha) of the total weight")
    if best is None or not (0.0 <= alpha_bound < ALPHA_MAX):
        return ClusterReport(False, (), float("nan"), float("nan"), float("nan"), messages)
    _, inl, mu, delta, delta2 = best
    return ClusterReport(True, inl, mu, delta, delta2, [])


# ---------------------------------------------------------------------------
# coordinate-wise aggregation
# ---------------------------------------------------------------------------


def node_weights(summaries: Sequence[LocalSummary], weighting: str) -> np.ndarray:
    if weighting == "uniform":
        return np.ones(len(summaries))
    if weighting == "sample_size":
        return np.array([s.sample_size for s in summaries], dtype=np.float64)
    raise DomainError(f"unknown weighting {weighting!r}")


def aggregate_columns(V, weights, eta):
    """Redescending minimiser of every column of the (m, d) array ``V``.

    Returns the (d,) vector of minimisers and a boolean uniqueness flag per
    column.
    """
    V = np.asarray(V, dtype=np.float64)
    m, d = V.shape
    eta = np.broadcast_to(np.asarray(eta, dtype=np.float64), (d,))
    weights = np.asarray(weights, dtype=np.float64)
    if m == 1:
        return V[0].copy(), np.ones(d, dtype=bool)
    order = np.argsort(V, axis=0, kind="stable")
    out = np.empty(d)
    unique = np.empty(d, dtype=bool)
    for j in range(d):
        o = order[:, j]
        x, _, _, _, tie = kernels.redescending(np.ascontiguousarray(V[o, j]),
                                                np.ascontiguousarray(weights[o]), eta[j], TIE_TOL)
        out[j] = x
        unique[j] = not tie
    return out, unique


def baseline_columns(V, weights, method: str, lam=None) -> np.ndarray:
    V = np.asarray(V, dtype=np.float64)
    if method == "mean":
        return np.average(V, axis=0, weights=weights)
    return np.array([baseline_location(method, V[:, j], weights, lam) for j in range(V.shape[1])])


def aggregate_vector(summaries: Sequence[LocalSummary], spec: AggregationSpec) -> np.ndarray:
    """Coordinate-wise redescending aggregate of the debiased coefficients."""
    if not summaries:
        raise DomainError("no summaries to aggregate")
    d = summaries[0].d
    if any(s.d != d for s in summaries):
        raise DomainError("summaries disagree on dimension")
    problems = validate_spec(spec, d)
    if problems:
        raise DomainError("; ".join(problems))
    V = np.vstack([s.debiased_coef for s in summaries])
    x, _ = aggregate_columns(V, node_weights(summaries, spec.weighting), spec.eta)
    return x
