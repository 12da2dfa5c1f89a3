"""Node-side computation: lasso fit, debiasing, and the summary to upload."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from .debias import (CoherenceReport, build_precision, coherence_report, debiased_estimate,
                     default_nodewise_lambda, weighted_design)
from .lasso import default_lambda, estimate_sigma, fit_penalized
from .losses import check_kind
from .model import AggregationSpec, Dataset, DomainError, LocalSummary, validate_dataset


@dataclass(frozen=True, eq=False)
class PipelineConfig:
    """Settings for one integrative run.

    ``threshold_override`` is ``(t0, local_levels)``; ``local_levels`` may be a
    scalar or one level per node.  ``seed`` only drives randomized helpers
    (cross-validation folds); the estimator itself is deterministic.
    """

    spec: AggregationSpec
    loss: str = "squared"
    lambda_constant: float = 1.0
    nodewise_constant: float = 1.0
    threshold_mode: str = "hard"
    threshold_override: Optional[tuple] = None
    seed: int = 0
    tol: float = 1e-8
    max_iter: int = 10000

    def __post_init__(self):
        check_kind(self.loss)
        if not (self.lambda_constant > 0 and self.nodewise_constant > 0):
            raise DomainError("lambda constants must be positive")
        if self.threshold_mode not in ("hard", "soft"):
            raise DomainError(f"unknown threshold mode {self.threshold_mode!r}")


@dataclass(frozen=True, eq=False)
class NodeDiagnostics:
    """Local audit record; it stays on the node and is never uploaded."""

    node_id: int
    lam: float
    pilot_lam: float
    nodewise_lambda: float
    kkt: float
    converged: bool
    nodewise_converged: bool
    coherence: CoherenceReport = field(repr=False)


def local_fit(ds: Dataset, cfg: PipelineConfig):
    """Fit one node and return ``(LocalSummary, NodeDiagnostics)``.

    For squared loss the noise scale comes from a pilot fit at unit scale,
    after which the lasso is refit once at the refined penalty.  Logistic
    loss has unit dispersion and skips the pilot.
    """
    problems = validate_dataset(ds)
    if problems:
        raise DomainError(f"node {ds.node_id}: " + "; ".join(problems))
    n, d = ds.design.shape
    pilot_lam = default_lambda(n, d, 1.0, cfg.lambda_constant)
    if cfg.loss == "squared":
        pilot = fit_penalized(ds, cfg.loss, pilot_lam, cfg.tol, cfg.max_iter)
        sigma = estimate_sigma(ds, pilot.coef)
        lam = default_lambda(n, d, sigma, cfg.lambda_constant)
    else:
        sigma = 1.0
        lam = pilot_lam
    fit = fit_penalized(ds, cfg.loss, lam, cfg.tol, cfg.max_iter)
    wd = weighted_design(ds, cfg.loss, fit.coef)
    lam_nw = default_nodewise_lambda(n, d, cfg.nodewise_constant)
    prec = build_precision(wd, lam_nw)
    debiased = debiased_estimate(ds, cfg.loss, fit.coef, prec)
    summary = LocalSummary(lasso_coef=fit.coef, debiased_coef=debiased, sample_size=n,
                           noise_sd=sigma)
    diag = NodeDiagnostics(node_id=ds.node_id, lam=lam, pilot_lam=pilot_lam,
                           nodewise_lambda=lam_nw, kkt=fit.kkt, converged=fit.converged,
                           nodewise_converged=bool(np.all(prec.converged)),
                           coherence=coherence_report(wd, prec))
    return summary, diag
