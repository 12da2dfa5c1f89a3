"""End-to-end integrative estimation and the averaging/median baselines.

Node work goes through :mod:`intreg.simnet`, so the coordinator functions
here only ever see the uploaded summaries.
"""
from __future__ import annotations

from typing import Sequence

import numpy as np

from .aggregate import aggregate_columns, baseline_columns, node_weights
from .local import NodeDiagnostics, PipelineConfig, local_fit
from .model import DomainError, IntegrativeResult, ThresholdSpec, validate_spec
from .simnet import execute_round
from .threshold import apply_threshold, default_thresholds

__all__ = ["PipelineConfig", "NodeDiagnostics", "local_fit", "integrate", "run_integrative",
           "run_baseline", "BASELINE_METHODS"]

BASELINE_METHODS = ("adele_mean", "median")


def _thresholds(summaries, cfg: PipelineConfig) -> ThresholdSpec:
    m = len(summaries)
    if cfg.threshold_override is not None:
        t0, tk = cfg.threshold_override
        tk = np.broadcast_to(np.asarray(tk, dtype=np.float64), (m,))
        return ThresholdSpec(mode=cfg.threshold_mode, global_level=t0, local_levels=tk)
    spec = cfg.spec
    sigma = spec.variance_bound
    if sigma is None:
        sigma = max(s.noise_sd for s in summaries)
    return default_thresholds(m, [s.sample_size for s in summaries], summaries[0].d, sigma,
                              alpha_max=spec.alpha_bound, weighting=spec.weighting,
                              mode=cfg.threshold_mode)


def integrate(summaries: Sequence, cfg: PipelineConfig, method: str = "redescending",
              node_ids=None, diagnostics=None, comm_log=None) -> IntegrativeResult:
    """Coordinator step: aggregate, threshold and split off per-node deltas.

    ``method`` is ``"redescending"`` or one of :data:`BASELINE_METHODS`.
    """
    if not summaries:
        raise DomainError("no summaries")
    d = summaries[0].d
    if any(s.d != d for s in summaries):
        raise DomainError("summaries disagree on dimension")
    problems = validate_spec(cfg.spec, d)
    if problems:
        raise DomainError("; ".join(problems))
    V = np.vstack([s.debiased_coef for s in summaries])
    w = node_weights(summaries, cfg.spec.weighting)
    if method == "redescending":
        dense, _ = aggregate_columns(V, w, cfg.spec.eta)
    elif method == "adele_mean":
        dense = baseline_columns(V, w, "mean")
    elif method == "median":
        dense = baseline_columns(V, w, "median")
    else:
        raise DomainError(f"unknown aggregation method {method!r}")
    ts = _thresholds(summaries, cfg)
    glob = apply_threshold(dense, ts.global_level, ts.mode)
    deltas = V - dense
    th_deltas = np.vstack([apply_threshold(deltas[k], ts.local_levels[k], ts.mode)
                           for k in range(len(summaries))])
    if node_ids is None:
        node_ids = tuple(range(len(summaries)))
    return IntegrativeResult(dense_global=dense, thresholded_global=glob, dense_deltas=deltas,
                             thresholded_deltas=th_deltas, thresholds=ts, node_ids=tuple(node_ids),
                             diagnostics=diagnostics, comm_log=comm_log, summaries=tuple(summaries))


def _run(datasets, cfg, method, threads):
    rr = execute_round(datasets, cfg, threads=threads)
    return integrate(rr.summaries, cfg, method, node_ids=rr.node_ids, diagnostics=rr.diagnostics,
                     comm_log=rr.log)


def run_integrative(datasets, cfg: PipelineConfig, threads: int = 1) -> IntegrativeResult:
    """Fit every node, aggregate with the redescending loss, then threshold.

    Examples
    --------
    >>> from intreg.datagen import Scenario, gen_scenario
    >>> from intreg.model import AggregationSpec
    >>> data, truth, eta = gen_scenario(Scenario("grow_n", m=4, n=60, d=20, seed=1))
    >>> res = run_integrative(data, PipelineConfig(AggregationSpec.constant(eta, 20)))
    >>> res.dense_deltas.shape
    (4, 20)
    """
    return _run(datasets, cfg, "redescending", threads)


def run_baseline(datasets, cfg: PipelineConfig, method: str, threads: int = 1) -> IntegrativeResult:
    """Same pipeline with the aggregation step swapped for a coordinate-wise
    mean (``"adele_mean"``) or weighted median (``"median"``)."""
    if method not in BASELINE_METHODS:
        raise DomainError(f"unknown baseline {method!r}; expected one of {BASELINE_METHODS}")
    return _run(datasets, cfg, method, threads)
