"""End-to-end pipeline runs, seeded sweeps, and CSV reporting.

A single run generates a seeded instance, searches for an equal fractional
split, rounds it, and (optionally) measures transfer discrepancy or runs the
subsidy chain.  Sweeps iterate a Cartesian grid over (n, k, m, seed) and
stream one CSV row per cell in deterministic grid order.

CSV output is byte-stable for a fixed config: the wall-time cell is left
empty unless timing is explicitly requested, since timings are the one
non-reproducible measurement.
"""
from __future__ import annotations

import io
import json
import math
import time
from dataclasses import dataclass, field, fields

import numpy as np

from . import measures, rounding, splitter, subsidy, valuations

COMMANDS = ("split", "round", "disc", "transfer", "subsidy", "sweep")

CSV_COLUMNS = (
    "command", "family", "n", "m", "k", "seed", "trials", "restarts", "tol",
    "imbalance", "realized_disc", "bound_predicted", "transfer_disc",
    "total_subsidy", "converged", "wall_time_ms",
)


@dataclass(frozen=True)
class ExperimentConfig:
    """One run description; lists in n/m/k/seeds define a sweep grid."""

    command: str
    family: str = "coverage"
    n: tuple = (2,)
    m: tuple = (16,)
    k: tuple = (2,)
    seeds: tuple = (0,)
    trials: int = 64
    restarts: int = 32
    tol: float = 1e-6
    workers: int = 1
    timing: bool = False
    with_transfer: bool = False
    with_subsidy: bool = False
    output_path: str | None = None
    instances_path: str | None = None

    def __post_init__(self):
        object.__setattr__(self, "n", _as_tuple(self.n))
        object.__setattr__(self, "m", _as_tuple(self.m))
        object.__setattr__(self, "k", _as_tuple(self.k))
        object.__setattr__(self, "seeds", _as_tuple(self.seeds))
        if self.command not in COMMANDS:
            raise ValueError(f"unknown command {self.command!r}; expected one of {COMMANDS}")
        for name in ("n", "m", "k", "seeds"):
            vals = getattr(self, name)
            if not vals or any(v < 0 for v in vals):
                raise ValueError(f"{name} must be a non-empty list of non-negative ints")
        if any(v < 1 for v in self.n + self.m + self.k):
            raise ValueError("counts must be >= 1")
        if self.command != "sweep" and (
            len(self.n) != 1 or len(self.m) != 1 or len(self.k) != 1 or len(self.seeds) != 1
        ):
            raise ValueError(f"command {self.command!r} takes single n/m/k/seed values")
        if self.trials < 1 or self.restarts < 1 or self.workers < 1:
            raise ValueError("trials, restarts and workers must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.family != "file" and self.family not in valuations.FAMILIES:
            raise ValueError(f"unknown family {self.family!r}")
        if self.family == "file" and not self.instances_path:
            raise ValueError("family='file' requires instances_path")

    @staticmethod
    def from_jsonable(doc: dict) -> "ExperimentConfig":
        known = {f.name for f in fields(ExperimentConfig)}
        unknown = set(doc) - known
        if unknown:
            raise ValueError(f"unknown config keys: {sorted(unknown)}")
        return ExperimentConfig(**doc)

    def to_jsonable(self) -> dict:
        return {
            "command": self.command, "family": self.family,
            "n": list(self.n), "m": list(self.m), "k": list(self.k),
            "seeds": list(self.seeds), "trials": self.trials,
            "restarts": self.restarts, "tol": self.tol, "workers": self.workers,
            "timing": self.timing, "with_transfer": self.with_transfer,
            "with_subsidy": self.with_subsidy, "output_path": self.output_path,
            "instances_path": self.instances_path,
        }


def _as_tuple(v):
    if isinstance(v, (int, np.integer)):
        return (int(v),)
    return tuple(int(x) for x in v)


@dataclass
class ResultRecord:
    """One pipeline run's measurements, echoing the cell that produced it."""

    command: str
    family: str
    n: int
    m: int
    k: int
    seed: int
    trials: int
    restarts: int
    tol: float
    imbalance: float | None = None
    realized_disc: float | None = None
    bound_predicted: float | None = None
    transfer_disc: float | None = None
    total_subsidy: float | None = None
    converged: bool | None = None
    wall_time_ms: float | None = None

    def csv_row(self, timing: bool) -> list:
        vals = []
        for col in CSV_COLUMNS:
            v = getattr(self, col)
            if col == "wall_time_ms" and not timing:
                v = None
            vals.append(_cell(v))
        return vals


def _cell(v) -> str:
    if v is None:
        return ""
    if isinstance(v, bool):
        return "true" if v else "false"
    if isinstance(v, float):
        return repr(v)
    return str(v)


def _load_file_instances(path, n, m):
    oracles, _ = valuations.load_instances(path)
    if len(oracles) != n:
        raise ValueError(f"instance file holds {len(oracles)} oracles, config expects n={n}")
    if oracles and oracles[0].m != m:
        raise ValueError(f"instance file has m={oracles[0].m}, config expects m={m}")
    return oracles


def run_single(command: str, family: str, n: int, m: int, k: int, seed: int,
               trials: int, restarts: int, tol: float,
               with_transfer: bool = False, with_subsidy: bool = False,
               instances_path: str | None = None) -> ResultRecord:
    """Execute one pipeline cell and return its record."""
    t0 = time.perf_counter()
    if command == "subsidy" or with_subsidy:
        if k != n:
            raise ValueError(f"subsidy runs need k == n, got k={k}, n={n}")
    if family == "file":
        V = _load_file_instances(instances_path, n, m)
    else:
        V = valuations.random_instance(family, n, m, seed)
    rec = ResultRecord(command=command, family=family, n=n, m=m, k=k, seed=seed,
                       trials=trials, restarts=restarts, tol=tol)

    config = splitter.SearchConfig(restarts=restarts, tol=tol, seed=seed)
    report = splitter.split_necklace(V, k, config=config)
    rec.imbalance = report.imbalance
    rec.converged = report.converged

    if command != "split":
        rr = rounding.round_best_of(V, report.coloring, trials=trials, seed=seed)
        rec.realized_disc = rr.realized_disc
        rec.bound_predicted = rr.bound_predicted
        if command == "transfer" or with_transfer:
            rec.transfer_disc = measures.transfer_disc_of_coloring(V, k, rr.coloring).value
        if command == "subsidy" or with_subsidy:
            _, payments, _ = subsidy.envy_free_with_subsidy(V, rr.coloring)
            rec.total_subsidy = payments.total

    rec.wall_time_ms = (time.perf_counter() - t0) * 1e3
    return rec


def run(config: ExperimentConfig) -> list:
    """Run a config; sweeps expand the grid in (n, k, m, seed) order."""
    if config.command == "sweep":
        cells = [
            (n, k, m, seed)
            for n in config.n for k in config.k for m in config.m for seed in config.seeds
        ]
        records = []
        for n, k, m, seed in cells:
            records.append(run_single(
                "sweep", config.family, n, m, k, seed,
                config.trials, config.restarts, config.tol,
                with_transfer=config.with_transfer, with_subsidy=config.with_subsidy,
                instances_path=config.instances_path,
            ))
        return records
    return [run_single(
        config.command, config.family, config.n[0], config.m[0], config.k[0],
        config.seeds[0], config.trials, config.restarts, config.tol,
        with_transfer=config.with_transfer, with_subsidy=config.with_subsidy,
        instances_path=config.instances_path,
    )]


def write_csv(records, fh, timing: bool = False) -> None:
    fh.write(",".join(CSV_COLUMNS) + "\n")
    for rec in records:
        fh.write(",".join(rec.csv_row(timing)) + "\n")


def records_to_csv(records, timing: bool = False) -> str:
    buf = io.StringIO()
    write_csv(records, buf, timing=timing)
    return buf.getvalue()


@dataclass(frozen=True)
class ScalingFit:
    """Least-squares coefficient against a model curve, with the worst
    relative residual of the per-n means."""

    coefficient: float
    residual: float
    model: str
    per_n_mean: dict = field(default_factory=dict)


SCALING_MODELS = ("sqrt-nlog-nk", "n-sqrt-nlogn")


def fit_scaling(records, model: str, metric: str = "realized_disc") -> ScalingFit:
    """Fit per-n means of a metric to the chosen growth curve.

    sqrt-nlog-nk: g(n) = sqrt(n log(nk)) (k must be constant across records);
    n-sqrt-nlogn: g(n) = n sqrt(n log n).  Requires at least 4 distinct n.
    """
    if model not in SCALING_MODELS:
        raise ValueError(f"unknown model {model!r}; expected one of {SCALING_MODELS}")
    pts = [(rec.n, rec.k, getattr(rec, metric)) for rec in records if getattr(rec, metric) is not None]
    if not pts:
        raise ValueError(f"no records carry metric {metric!r}")
    ns = sorted({p[0] for p in pts})
    if len(ns) < 4:
        raise ValueError(f"need >= 4 distinct n values, got {len(ns)}")
    if model == "sqrt-nlog-nk":
        ks = {p[1] for p in pts}
        if len(ks) != 1:
            raise ValueError("sqrt-nlog-nk model needs a single k across records")
        k = ks.pop()
        g = lambda n: math.sqrt(n * math.log(n * k))
    else:
        g = lambda n: n * math.sqrt(n * math.log(n))
    means = {n: float(np.mean([p[2] for p in pts if p[0] == n])) for n in ns}
    gs = np.array([g(n) for n in ns])
    ys = np.array([means[n] for n in ns])
    denom = float(gs @ gs)
    coef = float(gs @ ys) / denom if denom > 0 else 0.0
    if coef == 0.0:
        residual = float(np.max(np.abs(ys)))
    else:
        residual = float(np.max(np.abs(ys - coef * gs) / (coef * gs)))
    return ScalingFit(coefficient=coef, residual=residual, model=model, per_n_mean=means)
