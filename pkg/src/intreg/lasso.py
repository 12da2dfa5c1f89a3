"""l1-penalised M-estimation on one dataset by cyclic coordinate descent."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Optional

import numpy as np

from . import kernels
from .losses import check_kind, check_responses, loss_arrays
from .model import Dataset, DomainError

# Above this many features Gram matrices are not materialised.
GRAM_LIMIT = 2000
LOGISTIC_CYCLES = 25
WEIGHT_FLOOR = 1e-5


@dataclass(frozen=True, eq=False)
class LassoFit:
    coef: np.ndarray
    lam: float
    iterations: int
    converged: bool
    objective: float
    kkt: float
    history: Optional[np.ndarray] = None


def gradient(ds: Dataset, kind: str, coef) -> np.ndarray:
    """Gradient of the average loss, (1/n) sum_i rho'(y_i, x_i'coef) x_i."""
    X = ds.design
    _, d1, _ = loss_arrays(kind, ds.response, X @ coef)
    return X.T @ d1 / ds.n


def objective(ds: Dataset, kind: str, lam: float, coef) -> float:
    v, _, _ = loss_arrays(kind, ds.response, ds.design @ coef)
    return float(v.mean() + lam * np.abs(coef).sum())


def kkt_max_violation(ds: Dataset, kind: str, lam: float, coef) -> float:
    """Largest violation of the lasso optimality conditions at ``coef``.

    On the active set this is |grad_j + lam sign(coef_j)|, which equals
    ||grad_j| - lam| when the signs agree; off it, max(|grad_j| - lam, 0).
    """
    coef = np.asarray(coef, dtype=np.float64)
    g = gradient(ds, kind, coef)
    active = coef != 0
    v = np.where(active, np.abs(g + lam * np.sign(coef)), np.maximum(np.abs(g) - lam, 0.0))
    return float(v.max()) if v.size else 0.0


def default_lambda(n: int, d: int, noise_sd: float, constant: float = 1.0) -> float:
    """``constant * noise_sd * sqrt(log(d) / n)``."""
    if d < 2:
        raise DomainError("default_lambda needs d >= 2")
    if n < 1:
        raise DomainError("default_lambda needs n >= 1")
    if not (noise_sd > 0 and constant > 0):
        raise DomainError("noise_sd and constant must be positive")
    return constant * noise_sd * math.sqrt(math.log(d) / n)


def estimate_sigma(ds: Dataset, coef) -> float:
    """Residual noise scale sqrt(RSS / max(n - support, 1)), floored at 1e-12."""
    coef = np.asarray(coef, dtype=np.float64)
    r = ds.response - ds.design @ coef
    dof = max(ds.n - int(np.count_nonzero(coef)), 1)
    return max(math.sqrt(float(r @ r) / dof), 1e-12)


def solve_quadratic(X, y, w, lam, beta, tol, max_iter, exclude=-1, hist=None):
    """Weighted least-squares lasso from the warm start ``beta`` (in place).

    Minimises (1/2n) sum_i w_i (y_i - x_i'b)^2 + lam |b|_1.  Returns the kernel's
    (sweeps, converged, kkt).
    """
    n, d = X.shape
    if hist is None:
        hist = np.empty(0)
    if d < GRAM_LIMIT:
        Xw = X * w[:, None]
        G = Xw.T @ X / n
        c = Xw.T @ y / n
        return kernels.cd_gram(G, c, lam, beta, exclude, tol, 10.0 * tol, max_iter, hist)
    XT = np.ascontiguousarray(X.T)
    return kernels.cd_resid(XT, w, np.asarray(y, dtype=np.float64), lam, beta, exclude,
                            tol, 10.0 * tol, max_iter)


def fit_penalized(ds: Dataset, kind: str, lam: float, tol: float = 1e-8,
                  max_iter: int = 10000, record: bool = False) -> LassoFit:
    """Minimise the average loss plus ``lam * |coef|_1``.

    Squared loss is solved directly; logistic loss by at most 25 quadratic
    approximation cycles, each solved by coordinate descent.  A fit that runs
    out of iterations is returned with ``converged=False``.
    """
    check_kind(kind)
    if not lam >= 0:
        raise DomainError("lambda must be nonnegative")
    check_responses(kind, ds.response)
    X, y = ds.design, ds.response
    n, d = X.shape
    beta = np.zeros(d)
    hist = np.full(max_iter if record else 0, np.nan)

    if kind == "squared":
        it, ok, _ = solve_quadratic(X, y, np.ones(n), lam, beta, tol, max_iter, hist=hist)
    else:
        it, ok = _fit_logistic(ds, lam, beta, tol, max_iter)

    kkt = kkt_max_violation(ds, kind, lam, beta)
    history = hist[: min(it, hist.shape[0])] if record else None
    return LassoFit(coef=beta, lam=float(lam), iterations=int(it),
                    converged=bool(ok and kkt <= 10 * tol),
                    objective=objective(ds, kind, lam, beta), kkt=kkt, history=history)


def _fit_logistic(ds, lam, beta, tol, max_iter):
    X, y = ds.design, ds.response
    total = 0
    f_old = objective(ds, "logistic", lam, beta)
    for _ in range(LOGISTIC_CYCLES):
        a = X @ beta
        _, d1, d2 = loss_arrays("logistic", y, a)
        w = np.maximum(d2, WEIGHT_FLOOR)
        z = a - d1 / w
        prev = beta.copy()
        it, _, _ = solve_quadratic(X, z, w, lam, beta, tol, max(max_iter - total, 1))
        total += it
        # halve the step until the true objective does not increase
        f_new = objective(ds, "logistic", lam, beta)
        step = 1.0
        direction = beta - prev
        while f_new > f_old + 1e-15 * max(1.0, abs(f_old)) and step > 1e-6:
            step *= 0.5
            beta[:] = prev + step * direction
            f_new = objective(ds, "logistic", lam, beta)
        f_old = f_new
        change = np.abs(beta - prev).max() if beta.size else 0.0
        if change <= tol and kkt_max_violation(ds, "logistic", lam, beta) <= 10 * tol:
            return total, True
        if total >= max_iter:
            break
    return total, kkt_max_violation(ds, "logistic", lam, beta) <= 10 * tol
