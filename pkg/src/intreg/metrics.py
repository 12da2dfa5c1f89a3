"""Estimation error norms, support recovery and (eta, t) cross-validation."""
from __future__ import annotations

from dataclasses import dataclass, replace

import numpy as np

from .datagen import stream
from .model import AggregationSpec, Dataset, DomainError
from .pipeline import PipelineConfig, integrate
from .simnet import execute_round

ZERO_TOL = 1e-10
CV_STREAM = 3


@dataclass(frozen=True)
class ErrorReport:
    l1: float
    l2: float
    linf: float


def norm_errors(est, truth) -> ErrorReport:
    est = np.asarray(est, dtype=np.float64)
    truth = np.asarray(truth, dtype=np.float64)
    if est.shape != truth.shape:
        raise DomainError(f"length mismatch: {est.shape} vs {truth.shape}")
    diff = est - truth
    if diff.size == 0:
        return ErrorReport(0.0, 0.0, 0.0)
    a = np.abs(diff)
    top = float(a.max())
    # scale before squaring so tiny or huge entries neither underflow nor overflow
    l2 = top * float(np.linalg.norm(a / top)) if top > 0 else 0.0
    return ErrorReport(float(a.sum()), l2, top)


@dataclass(frozen=True)
class SupportReport:
    true_support_size: int
    recovered: bool
    precision: float
    recall: float


def support(v, zero_tol: float = ZERO_TOL) -> np.ndarray:
    return np.abs(np.asarray(v, dtype=np.float64)) > zero_tol


def support_metrics(est, truth, zero_tol: float = ZERO_TOL) -> SupportReport:
    """Support of ``est`` against that of ``truth``.

    Empty supports count as perfect: recall is 1 when the truth is empty and
    precision is 1 when the estimate is empty.
    """
    s_est, s_true = support(est, zero_tol), support(truth, zero_tol)
    if s_est.shape != s_true.shape:
        raise DomainError("length mismatch")
    hit = int(np.sum(s_est & s_true))
    n_est, n_true = int(s_est.sum()), int(s_true.sum())
    return SupportReport(true_support_size=n_true, recovered=hit == n_true,
                         precision=hit / n_est if n_est else 1.0,
                         recall=hit / n_true if n_true else 1.0)


def node_folds(n: int, folds: int, seed: int, node: int) -> np.ndarray:
    """Fold label of every row of one node (balanced, randomly permuted)."""
    if n < 2 * folds:
        raise DomainError(f"node {node}: {n} rows cannot fill {folds} folds of >= 2 rows")
    labels = np.arange(n) % folds
    return stream(seed, node, CV_STREAM).permutation(labels)


def cv_select(datasets, cfg: PipelineConfig, eta_grid, t_grid, folds: int = 5, seed=None,
              return_scores: bool = False):
    """Pick ``(eta, t)`` minimising held-out squared prediction error of the
    thresholded global estimate.

    Folds are drawn inside each node, so the held-out rows of node k are only
    ever predicted from summaries computed on node k's training rows (plus
    other nodes' summaries).  Local fits do not depend on ``eta`` or ``t``,
    so each fold runs the node round once and re-aggregates per grid point.
    Ties go to the smaller ``t``, then the smaller ``eta``.
    """
    eta_grid = np.asarray(eta_grid, dtype=np.float64).ravel()
    t_grid = np.asarray(t_grid, dtype=np.float64).ravel()
    if eta_grid.size == 0 or t_grid.size == 0:
        raise DomainError("grids must be nonempty")
    if folds < 2:
        raise DomainError("folds must be >= 2")
    if np.any(eta_grid <= 0) or np.any(t_grid < 0):
        raise DomainError("eta must be > 0 and t >= 0")
    seed = cfg.seed if seed is None else seed
    labels = [node_folds(ds.n, folds, seed, ds.node_id) for ds in datasets]
    sse = np.zeros((eta_grid.size, t_grid.size))
    total = 0
    for f in range(folds):
        train = [Dataset(ds.design[lab != f], ds.response[lab != f], ds.node_id)
                 for ds, lab in zip(datasets, labels)]
        rr = execute_round(train, cfg)
        X_out = np.vstack([ds.design[lab == f] for ds, lab in zip(datasets, labels)])
        y_out = np.concatenate([ds.response[lab == f] for ds, lab in zip(datasets, labels)])
        total += y_out.size
        for a, eta in enumerate(eta_grid):
            spec = spec_with_eta(cfg.spec, eta)
            for b, t in enumerate(t_grid):
                c = replace(cfg, spec=spec, threshold_override=(t, 0.0))
                res = integrate(rr.summaries, c)
                resid = y_out - X_out @ res.thresholded_global
                sse[a, b] += resid @ resid
    scores = sse / total
    best = scores.min()
    # scan t first (outer), then eta, so the first hit is the tie-break winner
    choice = None
    for b in np.argsort(t_grid, kind="stable"):
        for a in np.argsort(eta_grid, kind="stable"):
            if scores[a, b] <= best:
                choice = (float(eta_grid[a]), float(t_grid[b]))
                break
        if choice is not None:
            break
    if return_scores:
        return choice, scores
    return choice


def spec_with_eta(spec: AggregationSpec, eta) -> AggregationSpec:
    return replace(spec, eta=np.broadcast_to(np.asarray(eta, dtype=np.float64), spec.eta.shape))
