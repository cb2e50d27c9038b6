"""Run experiment configurations and write per-iteration records and summaries."""

from __future__ import annotations

import csv
import json
import math
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .. import inference as inf
from ..numerics import SeededRng, spd_with_condition
from ..student import StudentParams, log_density, sample
from .config import ExperimentConfig
from .fig1 import write_fig1

RECORD_FIELDS = ("replicate", "iteration", "metric", "acceptance", "wall_ns")

# stream ids under SeededRng(seed).child(replicate, ...)
_TARGET, _SOLVER, _EVAL = 0, 1, 2

EM_WEIGHTS = (0.4, 0.1, 0.2, 0.3)
EM_LOCATIONS = ((10.0, 10.0), (-10.0, 10.0), (-10.0, -10.0), (10.0, -10.0))


@dataclass(frozen=True)
class RunRecord:
    replicate: int
    iteration: int
    metric: float
    acceptance: float | None = None
    wall_ns: int = 0

    def row(self) -> list[str]:
        acc = "" if self.acceptance is None else repr(float(self.acceptance))
        return [str(self.replicate), str(self.iteration), repr(float(self.metric)), acc, str(self.wall_ns)]

    @classmethod
    def from_row(cls, row: dict) -> RunRecord:
        acc = row["acceptance"]
        return cls(int(row["replicate"]), int(row["iteration"]), float(row["metric"]),
                   None if acc == "" else float(acc), int(row["wall_ns"]))


@dataclass(frozen=True)
class ReplicateResult:
    replicate: int
    records: tuple[RunRecord, ...]
    abort_reason: str = ""
    abort_iteration: int = -1
    detail: str = ""


def make_target(cfg: ExperimentConfig, rng: SeededRng) -> StudentParams:
    """Target with location uniform on ``[-1, 1]^d`` and scale of condition number ``kappa``."""
    g = rng.generator()
    mu = g.uniform(-1.0, 1.0, cfg.d)
    return StudentParams(cfg.nu_target, mu, spd_with_condition(cfg.d, cfg.kappa, g))


def make_mixture(cfg: ExperimentConfig, rng: SeededRng) -> inf.MixtureModel:
    g = rng.generator()
    comps = []
    for loc in EM_LOCATIONS:
        mu = np.zeros(cfg.d)
        mu[:2] = loc
        comps.append(StudentParams(cfg.nu_target, mu, spd_with_condition(cfg.d, cfg.kappa, g)))
    return inf.MixtureModel(np.array(EM_WEIGHTS), tuple(comps))


class _Clock:
    def __init__(self, enabled: bool):
        self.enabled = enabled
        self.t0 = time.perf_counter_ns()

    def elapsed(self) -> int:
        return time.perf_counter_ns() - self.t0 if self.enabled else 0


def run_replicate(cfg: ExperimentConfig, rep: int, timing: bool = False) -> ReplicateResult:
    root = SeededRng(cfg.seed).child(rep)
    clock = _Clock(timing)
    s = cfg.scenario
    try:
        if s in ("vi_exact", "vi_mala", "vi_scaled_mala"):
            target = make_target(cfg, root.child(_TARGET))
            solver = {"vi_exact": inf.vi_exact_escort, "vi_mala": inf.vi_plain_mala,
                      "vi_scaled_mala": inf.vi_scaled_mala}[s]
            its = solver(target, cfg.nu_family, cfg.per_iter, cfg.n_iters, root.child(_SOLVER))
            wall = clock.elapsed()
            recs = tuple(RunRecord(rep, k, it.divergence, None if math.isnan(it.acceptance) else it.acceptance, wall)
                         for k, it in enumerate(its))
        elif s == "mle_online":
            target = make_target(cfg, root.child(_TARGET))
            stream = sample(target, max(cfg.n_iters, 1), root.child(_SOLVER).generator())[: cfg.n_iters]
            evals = sample(target, 1000, root.child(_EVAL).generator())
            init = StudentParams(cfg.nu_family, np.full(cfg.d, -2.0), 10.0 * np.eye(cfg.d))
            its = inf.mle_online(stream, cfg.nu_family, init=init)
            wall = clock.elapsed()
            recs = tuple(RunRecord(rep, k, float(np.mean(log_density(p, evals))), None, wall)
                         for k, p in enumerate(its))
        elif s == "em_mixture":
            truth = make_mixture(cfg, root.child(_TARGET))
            data, _ = truth.sample(cfg.n_data, root.child(_EVAL).generator())
            model = inf.em_init(len(EM_WEIGHTS), cfg.d, cfg.nu_family, root.child(_SOLVER).generator())
            _, lls = inf.em_run(model, data, cfg.n_iters)
            wall = clock.elapsed()
            recs = tuple(RunRecord(rep, k, float(v), None, wall) for k, v in enumerate(lls))
        else:  # pragma: no cover - fig1 does not run replicates
            raise ValueError(f"scenario {s} has no replicates")
    except inf.ReplicateAborted as exc:
        return ReplicateResult(rep, (), exc.reason, exc.iteration, str(exc))
    return ReplicateResult(rep, recs)


def _run_one(args):
    cfg, rep, timing = args
    return run_replicate(cfg, rep, timing)


def quartiles(values) -> tuple[float, float, float]:
    """25/50/75% exact order statistics (inverted CDF), NaNs ignored."""
    v = np.asarray(values, dtype=float)
    v = v[~np.isnan(v)]
    if v.size == 0:
        return (math.nan, math.nan, math.nan)
    q = np.quantile(v, [0.25, 0.5, 0.75], method="inverted_cdf")
    return tuple(float(x) for x in q)


def summarize(cfg: ExperimentConfig, results: list[ReplicateResult]) -> dict:
    by_iter: dict[int, list[float]] = {}
    for r in results:
        for rec in r.records:
            by_iter.setdefault(rec.iteration, []).append(rec.metric)
    iters = sorted(by_iter)
    qs = [quartiles(by_iter[k]) for k in iters]
    finals = [r.records[-1].metric for r in results if r.records]
    return {
        "config": cfg.to_json(),
        "status": "ok",
        "compatibility_value": _json_float(cfg.compatibility),
        "metric": "log_likelihood" if cfg.scenario in ("mle_online", "em_mixture") else "renyi_divergence",
        "iterations": iters,
        "q25": [_json_float(q[0]) for q in qs],
        "median": [_json_float(q[1]) for q in qs],
        "q75": [_json_float(q[2]) for q in qs],
        "final": dict(zip(("q25", "median", "q75"), map(_json_float, quartiles(finals)))),
        "n_replicates": cfg.n_replicates,
        "aborted": [{"replicate": r.replicate, "iteration": r.abort_iteration, "reason": r.abort_reason,
                     "detail": r.detail} for r in results if r.abort_reason],
    }


def _json_float(x: float):
    x = float(x)
    if math.isnan(x):
        return None
    if math.isinf(x):
        return "inf" if x > 0 else "-inf"
    return x


def write_records(path: Path, results: list[ReplicateResult]):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(RECORD_FIELDS)
        for r in results:
            for rec in r.records:
                w.writerow(rec.row())


def read_records(path: str | Path) -> list[RunRecord]:
    with open(path, newline="") as fh:
        return [RunRecord.from_row(row) for row in csv.DictReader(fh)]


def run_config(cfg: ExperimentConfig, out_dir: str | Path, workers: int = 1, timing: bool = False) -> dict:
    """Run every replicate of ``cfg`` and write ``records.csv`` and ``summary.json`` under ``out_dir``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    if cfg.scenario == "fig1":
        cs = write_fig1(out_dir)
        summary = {"config": cfg.to_json(), "status": "ok",
                   "curves": [{"lambda": c.lam, "alpha": c.alpha, "normalizable": c.ok,
                               "diagnostic": c.diagnostic} for c in cs]}
        _write_json(out_dir / "summary.json", summary)
        return summary
    cfg.check()
    jobs = [(cfg, rep, timing) for rep in range(cfg.n_replicates)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            results = list(pool.map(_run_one, jobs))
    else:
        results = [_run_one(j) for j in jobs]
    write_records(out_dir / "records.csv", results)
    summary = summarize(cfg, results)
    _write_json(out_dir / "summary.json", summary)
    return summary


def rejected_summary(cfg: ExperimentConfig, reason: str) -> dict:
    return {"config": cfg.to_json(), "status": "rejected", "reason": reason,
            "compatibility_value": _json_float(cfg.compatibility)}


def _write_json(path: Path, obj: dict):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
