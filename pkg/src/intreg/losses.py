"""Per-observation losses rho(y, a) and their derivatives in ``a``.

``squared`` is 0.5 (y - a)^2; ``logistic`` is log(1 + e^a) - y a with
responses coded 0/1.
"""
from __future__ import annotations

from typing import NamedTuple

import numpy as np

from .model import DomainError

LOSSES = ("squared", "logistic")


class LossTriple(NamedTuple):
    value: float
    d1: float
    d2: float


def check_kind(kind: str) -> str:
    if kind not in LOSSES:
        raise DomainError(f"unknown loss {kind!r}; expected one of {LOSSES}")
    return kind


def check_responses(kind: str, y) -> None:
    if kind == "logistic":
        y = np.asarray(y)
        if not np.all((y == 0) | (y == 1)):
            raise DomainError("logistic loss requires responses in {0, 1}")


def _log1pexp(a):
    # log(1 + e^a) without overflow
    return np.where(a > 0, a + np.log1p(np.exp(-np.abs(a))), np.log1p(np.exp(-np.abs(a))))


def _sigmoid(a):
    e = np.exp(-np.abs(a))
    return np.where(a >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def loss_arrays(kind: str, y, a):
    """Vectorised (value, d1, d2) for arrays ``y`` and linear predictor ``a``."""
    y = np.asarray(y, dtype=np.float64)
    a = np.asarray(a, dtype=np.float64)
    if kind == "squared":
        r = a - y
        return 0.5 * r * r, r, np.ones_like(r)
    if kind == "logistic":
        p = _sigmoid(a)
        return _log1pexp(a) - y * a, p - y, p * (1.0 - p)
    raise DomainError(f"unknown loss {kind!r}")


def evaluate_loss(kind: str, y: float, a: float) -> LossTriple:
    """Loss value with first and second derivative in ``a``.

    >>> evaluate_loss("squared", 0.0, 2.0)
    LossTriple(value=2.0, d1=2.0, d2=1.0)
    """
    check_kind(kind)
    if not np.isfinite(a):
        raise DomainError("linear predictor must be finite")
    check_responses(kind, y)
    v, g, h = loss_arrays(kind, y, a)
    return LossTriple(float(v), float(g), float(h))
