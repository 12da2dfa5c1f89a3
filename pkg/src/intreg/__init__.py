"""Integrative sparse regression across heterogeneous datasets.

Each node fits a lasso, debiases it with nodewise regression and uploads one
summary; the coordinator aggregates coordinate-wise under a capped quadratic
loss, thresholds the result and splits off per-node deviations.
"""
from ._accel import BACKEND
from .aggregate import (LocationProblem, LocationSolution, aggregate_location, aggregate_vector,
                        baseline_location, check_cluster_assumption, oracle_grid_min, psi)
from .datagen import Scenario, gen_design, gen_scenario
from .debias import build_precision, coherence_report, debiased_estimate
from .lasso import default_lambda, fit_penalized
from .losses import evaluate_loss
from .model import (AggregationSpec, Dataset, DomainError, IntegrativeResult, LocalSummary,
                    ThresholdSpec)
from .pipeline import PipelineConfig, run_baseline, run_integrative
from .threshold import apply_threshold, default_thresholds

__version__ = "0.1.0"
