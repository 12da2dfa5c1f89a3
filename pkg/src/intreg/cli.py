"""Command line entry point.

Subcommands
-----------
experiment    simulate a sweep over n or m and write per-replication and
              quantile-summary CSV files
run           fit on dataset files written by :func:`intreg.datagen.dump_dataset`
oracle-check  compare the exact aggregator with the brute-force grid oracle

Configs are flat ``key = value`` text; ``#`` starts a comment.  Exit status is
0 on success, 1 on validation errors and 2 on I/O errors.
"""
from __future__ import annotations

import argparse
import csv
import logging
import sys
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .aggregate import LocationProblem, aggregate_location, oracle_grid_min
from .datagen import Scenario, gen_scenario, load_dataset
from .metrics import norm_errors, support_metrics
from .model import AggregationSpec, DomainError
from .pipeline import PipelineConfig, integrate, run_integrative
from .simnet import execute_round
from .threshold import apply_threshold

log = logging.getLogger("intreg")

DETAIL_COLUMNS = ("sweep_param", "value", "rep", "estimator", "variant", "l1", "l2", "linf",
                  "support_recovered", "delta_l2", "comm_bytes", "seconds")
SUMMARY_COLUMNS = ("sweep_param", "value", "estimator", "variant", "reps", "l2_q05", "l2_q50",
                   "l2_q95", "l1_q50", "linf_q50", "delta_l2_q50")
ESTIMATORS = ("redescending", "redescending_weighted", "adele", "median")
VARIANTS = ("dense", "hard", "soft")


class ConfigError(DomainError):
    pass


# ---------------------------------------------------------------------------
# config parsing
# ---------------------------------------------------------------------------


def parse_config(text: str, source="<config>") -> dict:
    out = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ConfigError(f"{source}: line {lineno}: expected 'key = value', got {raw.strip()!r}")
        key, value = (s.strip() for s in line.split("=", 1))
        if not key:
            raise ConfigError(f"{source}: line {lineno}: empty key")
        if key in out:
            raise ConfigError(f"{source}: line {lineno}: duplicate key {key!r}")
        out[key] = (value, lineno)
    return out


def read_config(path) -> dict:
    path = Path(path)
    return parse_config(path.read_text(), source=str(path))


class _Reader:
    """Typed access to a parsed config that names the line on bad values."""

    def __init__(self, raw: dict, known):
        self.raw = raw
        unknown = sorted(set(raw) - set(known))
        if unknown:
            key = unknown[0]
            raise ConfigError(f"line {raw[key][1]}: unknown key {key!r}")

    def has(self, key):
        return key in self.raw

    def _get(self, key, conv, default):
        if key not in self.raw:
            return default
        value, lineno = self.raw[key]
        try:
            return conv(value)
        except ValueError:
            raise ConfigError(f"line {lineno}: bad value {value!r} for {key!r}") from None

    def str(self, key, default=None):
        return self._get(key, str, default)

    def int(self, key, default=None):
        return self._get(key, int, default)

    def float(self, key, default=None):
        return self._get(key, float, default)

    def floats(self, key, default=None):
        return self._get(key, lambda s: np.array([float(x) for x in s.split(",")]), default)

    def ints(self, key, default=None):
        return self._get(key, lambda s: [int(x) for x in s.split(",")], default)

    def words(self, key, default=None):
        return self._get(key, lambda s: tuple(w.strip() for w in s.split(",") if w.strip()), default)


RUN_KEYS = ("loss", "lambda_constant", "nodewise_constant", "eta", "weighting", "threshold_mode",
            "alpha", "seed", "t0", "tk", "variance_bound")


def pipeline_config(r: _Reader, d: int, seed=None) -> PipelineConfig:
    if not r.has("eta"):
        raise ConfigError("eta required")
    eta = r.floats("eta")
    if eta.size == 1:
        eta = np.full(d, eta[0])
    spec = AggregationSpec(eta=eta, weighting=r.str("weighting", "uniform"),
                           alpha_bound=r.float("alpha", 0.0),
                           variance_bound=r.float("variance_bound", None))
    override = None
    if r.has("t0") or r.has("tk"):
        if not (r.has("t0") and r.has("tk")):
            raise ConfigError("t0 and tk must be given together")
        override = (r.float("t0"), r.floats("tk"))
    return PipelineConfig(spec=spec, loss=r.str("loss", "squared"),
                          lambda_constant=r.float("lambda_constant", 1.0),
                          nodewise_constant=r.float("nodewise_constant", 1.0),
                          threshold_mode=r.str("threshold_mode", "hard"),
                          threshold_override=override,
                          seed=r.int("seed", 0) if seed is None else seed)


# ---------------------------------------------------------------------------
# experiment
# ---------------------------------------------------------------------------

PLAN_KEYS = ("scenario", "sweep", "values", "m", "n", "d", "replications", "estimators",
             "variants", "noise_sd", "eta", "lambda_constant", "nodewise_constant", "seed",
             "alpha")


@dataclass(frozen=True)
class ExperimentPlan:
    scenario: str = "grow_n"
    sweep: str = "n"
    values: tuple = (40, 80, 120, 160, 200)
    m: int = 10
    n: int = 100
    d: int = 500
    replications: int = 20
    estimators: tuple = ("redescending",)
    variants: tuple = VARIANTS
    noise_sd: float = 0.05
    eta: float = 5.0
    lambda_constant: float = 1.0
    nodewise_constant: float = 1.0
    alpha: float = 0.0
    seed: int = 0

    def __post_init__(self):
        if self.replications < 1:
            raise ConfigError("replications must be >= 1")
        if self.sweep not in ("n", "m"):
            raise ConfigError("sweep must be 'n' or 'm'")
        if not self.values:
            raise ConfigError("values must be nonempty")
        bad = [e for e in self.estimators if e not in ESTIMATORS]
        if bad or not self.estimators:
            raise ConfigError(f"unknown estimators {bad}; choose from {ESTIMATORS}")
        bad = [v for v in self.variants if v not in VARIANTS]
        if bad or not self.variants:
            raise ConfigError(f"unknown variants {bad}; choose from {VARIANTS}")

    @classmethod
    def from_config(cls, raw: dict, seed=None) -> "ExperimentPlan":
        r = _Reader(raw, PLAN_KEYS)
        base = cls.__dataclass_fields__
        kw = {}
        for key in PLAN_KEYS:
            if not r.has(key):
                continue
            default = base[key].default
            if key in ("values",):
                kw[key] = tuple(r.ints(key))
            elif key in ("estimators", "variants"):
                kw[key] = r.words(key)
            elif isinstance(default, int):
                kw[key] = r.int(key)
            elif isinstance(default, float):
                kw[key] = r.float(key)
            else:
                kw[key] = r.str(key)
        if seed is not None:
            kw["seed"] = seed
        return cls(**kw)


def _replication(plan: ExperimentPlan, value: int, rep: int):
    m, n = (value, plan.n) if plan.sweep == "m" else (plan.m, value)
    sc = Scenario(plan.scenario, m=m, n=n, d=plan.d, noise_sd=plan.noise_sd,
                  seed=plan.seed * 100003 + rep)
    datasets, truth, _ = gen_scenario(sc)
    spec = AggregationSpec.constant(plan.eta, plan.d, alpha_bound=plan.alpha)
    cfg = PipelineConfig(spec=spec, lambda_constant=plan.lambda_constant,
                         nodewise_constant=plan.nodewise_constant, seed=plan.seed)
    t_start = time.perf_counter()
    rr = execute_round(datasets, cfg)
    t_local = time.perf_counter() - t_start
    rows = []
    for est in plan.estimators:
        t1 = time.perf_counter()
        c, method = cfg, "redescending"
        if est == "redescending_weighted":
            c = replace(cfg, spec=replace(spec, weighting="sample_size"))
        elif est == "adele":
            method = "adele_mean"
        elif est == "median":
            method = "median"
        res = integrate(rr.summaries, c, method, node_ids=rr.node_ids, comm_log=rr.log)
        elapsed = t_local + time.perf_counter() - t1
        ts = res.thresholds
        for variant in plan.variants:
            if variant == "dense":
                glob, deltas = res.dense_global, res.dense_deltas
            else:
                glob = apply_threshold(res.dense_global, ts.global_level, variant)
                deltas = np.vstack([apply_threshold(res.dense_deltas[k], ts.local_levels[k], variant)
                                    for k in range(len(res.node_ids))])
            err = norm_errors(glob, truth.global_coef)
            delta_l2 = float(np.mean(np.linalg.norm(deltas - truth.local_deltas, axis=1)))
            rows.append({"sweep_param": plan.sweep, "value": value, "rep": rep, "estimator": est,
                         "variant": variant, "l1": err.l1, "l2": err.l2, "linf": err.linf,
                         "support_recovered": int(support_metrics(glob, truth.global_coef).recovered),
                         "delta_l2": delta_l2, "comm_bytes": res.comm_log.total_bytes,
                         "seconds": elapsed})
    return rows


def run_experiment(plan: ExperimentPlan, threads: int = 1):
    """Return ``(detail_rows, summary_rows)`` as lists of dicts, in
    deterministic (sweep value, replication) order."""
    tasks = [(v, r) for v in plan.values for r in range(plan.replications)]
    if threads > 1:
        with ThreadPoolExecutor(max_workers=threads) as pool:
            chunks = list(pool.map(lambda vr: _replication(plan, *vr), tasks))
    else:
        chunks = [_replication(plan, v, r) for v, r in tasks]
    detail = [row for chunk in chunks for row in chunk]
    summary = []
    for v in plan.values:
        for est in plan.estimators:
            for variant in plan.variants:
                sel = [r for r in detail if r["value"] == v and r["estimator"] == est
                       and r["variant"] == variant]
                l2 = np.array([r["l2"] for r in sel])
                q05, q50, q95 = np.quantile(l2, [0.05, 0.5, 0.95])
                summary.append({"sweep_param": plan.sweep, "value": v, "estimator": est,
                                "variant": variant, "reps": len(sel), "l2_q05": q05,
                                "l2_q50": q50, "l2_q95": q95,
                                "l1_q50": float(np.median([r["l1"] for r in sel])),
                                "linf_q50": float(np.median([r["linf"] for r in sel])),
                                "delta_l2_q50": float(np.median([r["delta_l2"] for r in sel]))})
    return detail, summary


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        return repr(float(v))
    return v


def write_csv(path, rows, columns) -> None:
    with Path(path).open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(columns)
        for row in rows:
            w.writerow([_fmt(row[c]) for c in columns])


def summary_path(out) -> Path:
    out = Path(out)
    return out.with_name(out.stem + "_summary" + (out.suffix or ".csv"))


# ---------------------------------------------------------------------------
# run on files
# ---------------------------------------------------------------------------


def run_once(data_paths, config_path, out_dir, threads: int = 1, seed=None, dump_messages=False):
    datasets = [load_dataset(p, node_id=k) for k, p in enumerate(data_paths)]
    if not datasets:
        raise ConfigError("no dataset files given")
    cfg = pipeline_config(_Reader(read_config(config_path), RUN_KEYS), datasets[0].d, seed)
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if dump_messages:
        rr = execute_round(datasets, cfg, threads=threads, dump_dir=out_dir / "messages")
        res = integrate(rr.summaries, cfg, node_ids=rr.node_ids, diagnostics=rr.diagnostics,
                        comm_log=rr.log)
    else:
        res = run_integrative(datasets, cfg, threads=threads)
    np.savetxt(out_dir / "theta_hat.txt", res.thresholded_global, fmt="%.17g")
    np.savetxt(out_dir / "theta_tilde.txt", res.dense_global, fmt="%.17g")
    np.savetxt(out_dir / "deltas_hat.txt", res.thresholded_deltas, fmt="%.17g")
    lines = [f"comm_bytes {res.comm_log.total_bytes}", f"rounds {res.comm_log.rounds}",
             f"t0 {res.thresholds.global_level!r}"]
    for dg in res.diagnostics:
        coh = dg.coherence
        lines.append(f"node {dg.node_id} lambda {dg.lam!r} kkt {dg.kkt:.3e} "
                     f"converged {int(dg.converged)} unit_diag_error {coh.unit_diag_error:.3e} "
                     f"max_coherence {coh.max_coherence:.3e} coherence_ok {int(coh.all_ok)}")
    (out_dir / "diagnostics.txt").write_text("\n".join(lines) + "\n")
    return res


# ---------------------------------------------------------------------------
# oracle check
# ---------------------------------------------------------------------------


def oracle_check(count: int = 1000, seed: int = 0, resolution: int = 4001):
    """Number of random problems where the exact solver loses to the grid."""
    rng = np.random.default_rng(seed)
    failures = 0
    for _ in range(count):
        m = int(rng.integers(1, 51))
        p = LocationProblem(rng.uniform(-10, 10, m), rng.uniform(0.1, 5.0, m),
                            float(rng.uniform(0.1, 20)))
        _, fo = oracle_grid_min(p, resolution)
        if aggregate_location(p).objective > fo + 1e-9:
            failures += 1
    return failures


# ---------------------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="intreg", description=__doc__.split("\n")[0])
    ap.add_argument("-v", "--verbose", action="store_true")
    sub = ap.add_subparsers(dest="command", required=True)

    def common(p, out_required=True):
        p.add_argument("--config", type=Path)
        p.add_argument("--out", type=Path, required=out_required)
        p.add_argument("--threads", type=int, default=1)
        p.add_argument("--seed", type=int, default=None)

    ex = sub.add_parser("experiment", help="simulate a sweep and write CSV")
    common(ex)
    rn = sub.add_parser("run", help="fit on dataset files")
    common(rn)
    rn.add_argument("data", nargs="+", type=Path)
    rn.add_argument("--dump-messages", action="store_true",
                    help="also write each node's binary upload under OUT/messages")
    oc = sub.add_parser("oracle-check", help="exact aggregator vs grid oracle")
    common(oc, out_required=False)
    oc.add_argument("--count", type=int, default=1000)
    return ap


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        if args.command == "experiment":
            raw = read_config(args.config) if args.config else {}
            plan = ExperimentPlan.from_config(raw, seed=args.seed)
            detail, summary = run_experiment(plan, threads=args.threads)
            write_csv(args.out, detail, DETAIL_COLUMNS)
            write_csv(summary_path(args.out), summary, SUMMARY_COLUMNS)
            log.info("wrote %d detail rows to %s", len(detail), args.out)
        elif args.command == "run":
            if args.config is None:
                raise ConfigError("--config is required for run")
            run_once(args.data, args.config, args.out, threads=args.threads, seed=args.seed,
                     dump_messages=args.dump_messages)
        else:
            fails = oracle_check(args.count, seed=args.seed or 0)
            print(f"oracle-check: {fails} of {args.count} problems worse than the grid oracle")
            if args.out:
                args.out.write_text(f"{fails}\n")
            return 1 if fails else 0
    except OSError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except DomainError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
