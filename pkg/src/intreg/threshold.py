"""Hard and soft thresholding, and default threshold levels."""
import math

import numpy as np

from .model import DomainError, ThresholdSpec


def hard_threshold(v, t):
    v = np.asarray(v, dtype=np.float64)
    return np.where(np.abs(v) >= t, v, 0.0)


def soft_threshold(v, t):
    v = np.asarray(v, dtype=np.float64)
    return np.sign(v) * np.maximum(np.abs(v) - t, 0.0)


def apply_threshold(v, t: float, mode: str = "hard") -> np.ndarray:
    """Hard keeps entries with ``|v_j| >= t``; soft shrinks magnitudes by ``t``."""
    if not t >= 0:
        raise DomainError("threshold must be nonnegative")
    if mode == "hard":
        return hard_threshold(v, t)
    if mode == "soft":
        return soft_threshold(v, t)
    raise DomainError(f"unknown threshold mode {mode!r}")


def default_thresholds(m: int, n, d: int, noise_sd: float, alpha_max: float = 0.0,
                       weighting: str = "uniform", mode: str = "hard") -> ThresholdSpec:
    """Levels ``4 sigma sqrt(log d / N)`` for the global estimate and
    ``4 sigma sqrt(log d / n_k)`` for each node's deviation.

    ``N`` is ``(1 - alpha_max) m min_k n_k`` under uniform weighting and
    ``(1 - alpha_max) sum_k n_k`` under sample-size weighting.
    """
    n = np.asarray(n, dtype=np.float64).ravel()
    if n.size != m:
        raise DomainError(f"expected {m} sample sizes, got {n.size}")
    if d < 2:
        raise DomainError("default thresholds need d >= 2")
    if np.any(n < 1):
        raise DomainError("sample sizes must be >= 1")
    if not alpha_max < 1:
        raise DomainError("alpha_max must be < 1")
    if weighting == "uniform":
        pooled = m * n.min()
    elif weighting == "sample_size":
        pooled = n.sum()
    else:
        raise DomainError(f"unknown weighting {weighting!r}")
    logd = math.log(d)
    t0 = 4.0 * noise_sd * math.sqrt(logd / ((1.0 - alpha_max) * pooled))
    local = 4.0 * noise_sd * np.sqrt(logd / n)
    return ThresholdSpec(mode=mode, global_level=t0, local_levels=local)
