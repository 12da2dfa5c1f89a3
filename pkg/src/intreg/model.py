"""Shared domain types and their validation.

All arrays are float64.  Containers freeze the arrays they hold so that a
constructed object can be shared freely between threads.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Optional

import numpy as np

ALPHA_MAX = 3.0 / 7.0
WEIGHTINGS = ("uniform", "sample_size")
THRESHOLD_MODES = ("hard", "soft")


class DomainError(ValueError):
    """Raised when an argument lies outside the domain of an operation."""


def _frozen(a, ndim=None):
    arr = np.array(a, dtype=np.float64, copy=True)
    if ndim is not None and arr.ndim != ndim:
        raise DomainError(f"expected a {ndim}-d array, got shape {arr.shape}")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class Dataset:
    """One node's design matrix and response vector.

    Construction does not validate; call :func:`validate_dataset` for a
    report of invariant violations.
    """

    design: np.ndarray
    response: np.ndarray
    node_id: int = 0

    def __post_init__(self):
        object.__setattr__(self, "design", _frozen(np.atleast_2d(self.design), 2))
        object.__setattr__(self, "response", _frozen(np.ravel(self.response), 1))
        object.__setattr__(self, "node_id", int(self.node_id))

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def d(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True, eq=False)
class LocalSummary:
    """The only payload a node sends to the coordinator."""

    lasso_coef: np.ndarray
    debiased_coef: np.ndarray
    sample_size: int
    noise_sd: float

    def __post_init__(self):
        object.__setattr__(self, "lasso_coef", _frozen(self.lasso_coef, 1))
        object.__setattr__(self, "debiased_coef", _frozen(self.debiased_coef, 1))
        object.__setattr__(self, "sample_size", int(self.sample_size))
        object.__setattr__(self, "noise_sd", float(self.noise_sd))
        if self.lasso_coef.shape != self.debiased_coef.shape:
            raise DomainError("lasso_coef and debiased_coef differ in length")
        if self.sample_size < 1:
            raise DomainError("sample_size must be >= 1")
        if not (np.all(np.isfinite(self.lasso_coef)) and np.all(np.isfinite(self.debiased_coef))):
            raise DomainError("summary vectors must be finite")
        if not self.noise_sd >= 0:
            raise DomainError("noise_sd must be nonnegative")

    @property
    def d(self) -> int:
        return self.lasso_coef.shape[0]


@dataclass(frozen=True, eq=False)
class AggregationSpec:
    """Per-coordinate redescending radii and weighting mode.

    ``variance_bound`` is the noise scale used for the global threshold; when
    left as None the pipeline uses the largest per-node noise estimate.
    """

    eta: np.ndarray
    weighting: str = "uniform"
    alpha_bound: float = 0.0
    variance_bound: Optional[float] = None

    def __post_init__(self):
        object.__setattr__(self, "eta", _frozen(np.atleast_1d(self.eta), 1))
        object.__setattr__(self, "alpha_bound", float(self.alpha_bound))

    @classmethod
    def constant(cls, eta: float, d: int, **kw) -> "AggregationSpec":
        return cls(eta=np.full(d, float(eta)), **kw)


@dataclass(frozen=True, eq=False)
class ThresholdSpec:
    mode: str
    global_level: float
    local_levels: np.ndarray

    def __post_init__(self):
        if self.mode not in THRESHOLD_MODES:
            raise DomainError(f"unknown threshold mode {self.mode!r}")
        object.__setattr__(self, "global_level", float(self.global_level))
        object.__setattr__(self, "local_levels", _frozen(np.atleast_1d(self.local_levels), 1))
        if self.global_level < 0 or np.any(self.local_levels < 0):
            raise DomainError("threshold levels must be nonnegative")


@dataclass(frozen=True, eq=False)
class IntegrativeResult:
    """Output of one integrative run.

    ``dense_deltas`` and ``thresholded_deltas`` are (m, d) arrays whose rows
    follow node_id order.
    """

    dense_global: np.ndarray
    thresholded_global: np.ndarray
    dense_deltas: np.ndarray
    thresholded_deltas: np.ndarray
    thresholds: ThresholdSpec
    node_ids: tuple
    diagnostics: Any = None
    comm_log: Any = None
    summaries: tuple = field(default=())

    def __post_init__(self):
        for name in ("dense_global", "thresholded_global"):
            object.__setattr__(self, name, _frozen(getattr(self, name), 1))
        for name in ("dense_deltas", "thresholded_deltas"):
            object.__setattr__(self, name, _frozen(getattr(self, name), 2))


def validate_dataset(ds: Dataset) -> list:
    """Return a list of invariant violations; empty when ``ds`` is well formed."""
    report = []
    X, y = ds.design, ds.response
    if X.shape[0] < 1:
        report.append("design has no rows")
    if X.shape[1] < 1:
        report.append("design has no columns")
    if y.shape[0] != X.shape[0]:
        report.append(f"response length mismatch: {y.shape[0]} != {X.shape[0]} rows")
    bad = np.argwhere(~np.isfinite(X))
    for r, c in bad[:10]:
        report.append(f"non-finite entry at ({r}, {c})")
    if len(bad) > 10:
        report.append(f"... {len(bad) - 10} more non-finite design entries")
    for i in np.flatnonzero(~np.isfinite(y))[:10]:
        report.append(f"non-finite response at {i}")
    return report


def validate_spec(spec: AggregationSpec, d: int) -> list:
    """Return a list of problems with ``spec`` for dimension ``d``."""
    report = []
    if spec.eta.shape[0] != d:
        report.append(f"eta length {spec.eta.shape[0]} != d={d}")
    for j in np.flatnonzero(~(spec.eta > 0)):
        report.append(f"eta_{j + 1} <= 0")
    if not (0.0 <= spec.alpha_bound < ALPHA_MAX):
        report.append(f"alpha {spec.alpha_bound} outside [0, 3/7)")
    if spec.weighting not in WEIGHTINGS:
        report.append(f"unknown weighting {spec.weighting!r}")
    if spec.variance_bound is not None and not spec.variance_bound > 0:
        report.append("variance_bound must be positive")
    return report
