"""Debiased lasso via nodewise regression on the loss-weighted design."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels
from .lasso import GRAM_LIMIT, WEIGHT_FLOOR, default_lambda, gradient
from .losses import check_kind, loss_arrays
from .model import Dataset, DomainError

TAU_FLOOR = 1e-12
# Nodewise fits are solved well below the main tolerance so that the
# off-diagonal KKT box holds to 1e-8 after division by tau^2.
NODEWISE_TOL = 1e-11
NODEWISE_MAX_ITER = 10000


class DegenerateColumnError(DomainError):
    def __init__(self, j, tau_sq):
        super().__init__(f"nodewise residual scale tau^2={tau_sq:.3g} for column {j} is degenerate")
        self.column = j
        self.tau_sq = tau_sq


@dataclass(frozen=True, eq=False)
class NodewiseFit:
    gamma: np.ndarray  # length d - 1, column j removed
    tau_sq: float
    row: np.ndarray  # row j of the precision estimate
    converged: bool = True


@dataclass(frozen=True, eq=False)
class PrecisionEstimate:
    theta: np.ndarray  # (d, d); row j is NodewiseFit.row for column j
    tau_sq: np.ndarray
    nodewise_lambda: float
    converged: np.ndarray

    @property
    def d(self) -> int:
        return self.theta.shape[0]


@dataclass(frozen=True, eq=False)
class CoherenceReport:
    unit_diag_error: float
    offdiag_bound_ok: np.ndarray  # bool per row
    row_coherence: np.ndarray  # ||Sigma Theta_j' - e_j||_inf per row
    max_coherence: float

    @property
    def all_ok(self) -> bool:
        return bool(np.all(self.offdiag_bound_ok))


def weighted_design(ds: Dataset, kind: str, coef) -> np.ndarray:
    """Rows scaled by sqrt(rho''(y_i, x_i'coef)); rho'' is floored at 1e-5."""
    check_kind(kind)
    if kind == "squared":
        return np.array(ds.design)
    _, _, d2 = loss_arrays(kind, ds.response, ds.design @ np.asarray(coef, dtype=np.float64))
    return ds.design * np.sqrt(np.maximum(d2, WEIGHT_FLOOR))[:, None]


def default_nodewise_lambda(n: int, d: int, constant: float = 1.0) -> float:
    return default_lambda(n, d, 1.0, constant)


def _assemble_row(gamma_full, tau_sq, j):
    row = -gamma_full / tau_sq
    row[j] = 1.0 / tau_sq
    return row


def _gram(wdesign):
    n = wdesign.shape[0]
    return wdesign.T @ wdesign / n


def fit_nodewise(wdesign, j: int, lambda_nw: float) -> NodewiseFit:
    """Lasso of column ``j`` on the others with the 1/(2n) loss scaling."""
    wdesign = np.asarray(wdesign, dtype=np.float64)
    n, d = wdesign.shape
    if d < 2:
        raise DomainError("nodewise regression needs d >= 2")
    if not 0 <= j < d:
        raise DomainError(f"column index {j} out of range")
    gamma = np.zeros(d)
    if d < GRAM_LIMIT:
        G = _gram(wdesign)
        c = G[j].copy()
        _, ok, _ = kernels.cd_gram(G, c, lambda_nw, gamma, j, NODEWISE_TOL, 10 * NODEWISE_TOL,
                                   NODEWISE_MAX_ITER, np.empty(0))
    else:
        XT = np.ascontiguousarray(wdesign.T)
        _, ok, _ = kernels.cd_resid(XT, np.ones(n), wdesign[:, j].copy(), lambda_nw, gamma, j,
                                    NODEWISE_TOL, 10 * NODEWISE_TOL, NODEWISE_MAX_ITER)
    r = wdesign[:, j] - wdesign @ gamma
    tau_sq = float(r @ r) / n + lambda_nw * float(np.abs(gamma).sum())
    if tau_sq < TAU_FLOOR:
        raise DegenerateColumnError(j, tau_sq)
    return NodewiseFit(gamma=np.delete(gamma, j), tau_sq=tau_sq,
                       row=_assemble_row(gamma, tau_sq, j), converged=bool(ok))


def build_precision(wdesign, lambda_nw: float) -> PrecisionEstimate:
    """Approximate inverse of the weighted Gram matrix, one nodewise lasso per row."""
    wdesign = np.asarray(wdesign, dtype=np.float64)
    n, d = wdesign.shape
    if d < 2:
        raise DomainError("nodewise regression needs d >= 2")
    if not lambda_nw > 0:
        raise DomainError("nodewise lambda must be positive")
    if d >= GRAM_LIMIT:
        fits = [fit_nodewise(wdesign, j, lambda_nw) for j in range(d)]
        theta = np.vstack([f.row for f in fits])
        return PrecisionEstimate(theta=theta, tau_sq=np.array([f.tau_sq for f in fits]),
                                 nodewise_lambda=float(lambda_nw),
                                 converged=np.array([f.converged for f in fits]))
    G = _gram(wdesign)
    gamma, tau_sq, _, conv, _ = kernels.nodewise_all(G, lambda_nw, NODEWISE_TOL,
                                                     10 * NODEWISE_TOL, NODEWISE_MAX_ITER)
    bad = np.flatnonzero(tau_sq < TAU_FLOOR)
    if bad.size:
        raise DegenerateColumnError(int(bad[0]), float(tau_sq[bad[0]]))
    theta = -gamma / tau_sq[:, None]
    theta[np.diag_indices(d)] = 1.0 / tau_sq
    return PrecisionEstimate(theta=theta, tau_sq=tau_sq, nodewise_lambda=float(lambda_nw),
                             converged=conv)


def debiased_estimate(ds: Dataset, kind: str, lasso_coef, prec: PrecisionEstimate) -> np.ndarray:
    """One-step correction ``coef - Theta grad(coef)``."""
    lasso_coef = np.asarray(lasso_coef, dtype=np.float64)
    if prec.d != lasso_coef.shape[0] or ds.d != prec.d:
        raise DomainError("precision estimate, coefficients and design disagree on d")
    return lasso_coef - prec.theta @ gradient(ds, kind, lasso_coef)


def coherence_report(wdesign, prec: PrecisionEstimate, slack: float = 1e-8) -> CoherenceReport:
    wdesign = np.asarray(wdesign, dtype=np.float64)
    M = prec.theta @ _gram(wdesign)  # row j is (Sigma Theta_j')'
    diag = np.diag(M)
    unit_err = float(np.abs(diag - 1.0).max())
    off = M.copy()
    off[np.diag_indices_from(off)] -= 1.0
    row_coh = np.abs(off).max(axis=1)
    ok = row_coh <= prec.nodewise_lambda / prec.tau_sq + slack
    return CoherenceReport(unit_diag_error=unit_err, offdiag_bound_ok=ok,
                           row_coherence=row_coh, max_coherence=float(row_coh.max()))
