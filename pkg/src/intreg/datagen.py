"""Synthetic multi-node regression data.

Random streams
--------------
Every draw comes from a Philox generator keyed by
``SeedSequence(seed, spawn_key=(node, purpose))`` with purposes
``DESIGN`` (covariates), ``NOISE`` (response noise) and ``LOCATION`` (1-D
location scenarios), so nodes can be generated independently and in any
order.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path
from typing import Sequence

import numpy as np
from scipy.stats import norm

from .model import Dataset, DomainError

SCENARIOS = ("grow_n", "grow_m", "cluster_1d", "median_fail_1d")
AR_COEF = 0.75
AR_BLOCK = 100
CUTOFF = float(norm.ppf(0.75))
BLOCK = 5
OUTLIER_VALUE = 40.0
RECOMMENDED_ETA = 5.0

DESIGN, NOISE, LOCATION = 0, 1, 2


def stream(seed: int, node: int, purpose: int) -> np.random.Generator:
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(node, purpose))))


def latent_design(n: int, d: int, rng: np.random.Generator) -> np.ndarray:
    """Gaussian latent matrix; the first ``min(100, d)`` columns are a stationary
    AR(1) with lag-one correlation 0.75 and unit marginal variance."""
    z = rng.standard_normal((n, d))
    p = min(AR_BLOCK, d)
    scale = np.sqrt(1.0 - AR_COEF ** 2)
    for j in range(1, p):
        z[:, j] = AR_COEF * z[:, j - 1] + scale * z[:, j]
    return z


def trichotomize(z, c: float = CUTOFF) -> np.ndarray:
    z = np.asarray(z)
    return np.where(z > c, 1.0, np.where(z < -c, -1.0, 0.0))


def gen_design(n: int, d: int, seed: int = 0, node: int = 0) -> np.ndarray:
    """Trichotomized design with entries in {-1, 0, 1}."""
    if n < 1 or d < 1:
        raise DomainError("n and d must be >= 1")
    return trichotomize(latent_design(n, d, stream(seed, node, DESIGN)))


@dataclass(frozen=True, eq=False)
class Scenario:
    """``n`` may be a scalar (shared by all nodes) or one size per node."""

    kind: str
    m: int
    n: object
    d: int = 500
    noise_sd: float = 0.05
    seed: int = 0

    def __post_init__(self):
        if self.kind not in SCENARIOS:
            raise DomainError(f"unknown scenario {self.kind!r}")
        if self.m < 1:
            raise DomainError("m must be >= 1")
        sizes = np.broadcast_to(np.asarray(self.n, dtype=np.int64), (self.m,)).copy()
        if np.any(sizes < 1):
            raise DomainError("sample sizes must be >= 1")
        object.__setattr__(self, "n", sizes)
        if self.kind in ("grow_n", "grow_m") and self.d < 12:
            raise DomainError(f"d={self.d} too small for the coefficient blocks (need d >= 12)")
        if not self.noise_sd > 0:
            raise DomainError("noise_sd must be positive")


@dataclass(frozen=True, eq=False)
class GroundTruth:
    local_coefs: np.ndarray   # (m, d)
    global_coef: np.ndarray   # (d,)

    @property
    def local_deltas(self) -> np.ndarray:
        return self.local_coefs - self.global_coef


def block_coefficients(m: int, d: int) -> GroundTruth:
    """Local coefficient matrix of the sign-split block design.

    Every node has 5 on coordinates 1-5; coordinates 6-10 are +5 for the first
    ``m // 2`` nodes and -5 for the rest; the last node also has 40 on
    coordinates 11-12.
    """
    if d < 12:
        raise DomainError("need d >= 12")
    theta = np.zeros((m, d))
    theta[:, :BLOCK] = 5.0
    theta[: m // 2, BLOCK:2 * BLOCK] = 5.0
    theta[m // 2:, BLOCK:2 * BLOCK] = -5.0
    theta[-1, 2 * BLOCK:2 * BLOCK + 2] = OUTLIER_VALUE
    glob = np.zeros(d)
    glob[:BLOCK] = 5.0
    return GroundTruth(theta, glob)


def datasets_from_coefs(coefs, sizes, noise_sd: float, seed: int) -> list:
    """One regression dataset per row of ``coefs`` with trichotomized design and
    Gaussian noise."""
    coefs = np.atleast_2d(np.asarray(coefs, dtype=np.float64))
    m, d = coefs.shape
    sizes = np.broadcast_to(np.asarray(sizes, dtype=np.int64), (m,))
    out = []
    for k in range(m):
        X = gen_design(int(sizes[k]), d, seed, node=k)
        eps = stream(seed, k, NOISE).standard_normal(int(sizes[k]))
        out.append(Dataset(X, X @ coefs[k] + noise_sd * eps, node_id=k))
    return out


def _location_datasets(means, sizes, noise_sd, seed):
    # intercept-only datasets: node k observes n_k draws of N(means[k], noise_sd^2)
    out = []
    for k, (mu, nk) in enumerate(zip(means, sizes)):
        y = mu + noise_sd * stream(seed, k, LOCATION).standard_normal(int(nk))
        out.append(Dataset(np.ones((int(nk), 1)), y, node_id=k))
    return out


def gen_scenario(sc: Scenario):
    """Build ``(datasets, truth, recommended_eta)`` for a scenario.

    ``cluster_1d``: 70% of nodes (rounded up) share location 1.0, the rest sit
    at 1 + 20 and beyond; ``median_fail_1d``: node k has location 2k.  Both
    use intercept-only datasets with ``d = 1``.
    """
    if sc.kind in ("grow_n", "grow_m"):
        truth = block_coefficients(sc.m, sc.d)
        return (datasets_from_coefs(truth.local_coefs, sc.n, sc.noise_sd, sc.seed), truth,
                RECOMMENDED_ETA)
    if sc.kind == "median_fail_1d":
        means = 2.0 * np.arange(1, sc.m + 1)
        glob = float(np.median(means))
        eta = 1.0
    else:
        n_in = int(np.ceil(0.7 * sc.m))
        means = np.ones(sc.m)
        means[n_in:] = 1.0 + 20.0 * np.arange(1, sc.m - n_in + 1)
        glob = 1.0
        eta = 5.0
    truth = GroundTruth(means[:, None].copy(), np.array([glob]))
    return _location_datasets(means, sc.n, sc.noise_sd, sc.seed), truth, eta


# ---------------------------------------------------------------------------
# text format: first line "n d", then n rows of d covariates and the response
# ---------------------------------------------------------------------------


class ParseError(DomainError):
    def __init__(self, path, line, msg):
        super().__init__(f"{path}:{line}: {msg}")
        self.path, self.line = path, line


def dump_dataset(ds: Dataset, path) -> None:
    path = Path(path)
    with path.open("w") as fh:
        fh.write(f"{ds.n} {ds.d}\n")
        np.savetxt(fh, np.column_stack([ds.design, ds.response]), fmt="%.17g")


def dump_datasets(datasets: Sequence[Dataset], directory) -> list:
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for ds in datasets:
        p = directory / f"node_{ds.node_id}.txt"
        dump_dataset(ds, p)
        paths.append(p)
    return paths


def load_dataset(path, node_id: int = 0) -> Dataset:
    """Read a dataset written by :func:`dump_dataset`; malformed input raises
    :class:`ParseError` naming the offending line."""
    path = Path(path)
    with path.open() as fh:
        lines = fh.read().splitlines()
    if not lines:
        raise ParseError(path, 1, "empty file, expected header 'n d'")
    head = lines[0].split()
    try:
        if len(head) != 2:
            raise ValueError
        n, d = int(head[0]), int(head[1])
        if n < 1 or d < 1:
            raise ValueError
    except ValueError:
        raise ParseError(path, 1, f"malformed header {lines[0]!r}, expected 'n d'") from None
    rows = np.empty((n, d + 1))
    body = [(i, ln) for i, ln in enumerate(lines[1:], start=2) if ln.strip()]
    if len(body) != n:
        raise ParseError(path, len(lines), f"expected {n} data rows, found {len(body)}")
    for r, (lineno, ln) in enumerate(body):
        parts = ln.split()
        if len(parts) != d + 1:
            raise ParseError(path, lineno, f"expected {d + 1} fields, found {len(parts)}")
        try:
            rows[r] = [float(x) for x in parts]
        except ValueError:
            raise ParseError(path, lineno, "non-numeric field") from None
    return Dataset(rows[:, :d], rows[:, d], node_id=node_id)
