"""Independent randomized rounding of fractional colorings.

Each item draws its color from its own row distribution, independently of
the other items.  Only fractional coordinates are random, so for a coloring
with at most t fractional items per color the per-agent deviation from the
common fractional value concentrates like a bounded-difference function of t
independent draws; the predicted scale sqrt(2 t log(nk)) is reported next to
the realized discrepancy.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass

import numpy as np

from . import measures
from .splitter import check_fractional_coloring, column_values, fractional_counts

_ROUND_STREAM = 0x524E  # seed-domain tag for rounding randomness

BOUND_CONSTANT = 2.0  # c in sqrt(c * t * log(nk)); keeps the union-bound success probability positive


def round_once(chi, seed) -> np.ndarray:
    """Draw one integral coloring, item colors independent given chi."""
    arr = check_fractional_coloring(chi)
    m, k = arr.shape
    rng = np.random.default_rng(seed)
    u = rng.random(m)
    cum = np.cumsum(arr, axis=1)
    colors = (u[:, None] > cum).sum(axis=1)
    return np.minimum(colors, k - 1).astype(int)


def mcdiarmid_tail(t: int, a: float) -> float:
    """Two-sided bounded-differences tail 2*exp(-2a^2/t) at unit marginals.

    >>> mcdiarmid_tail(5, 0.0)
    2.0
    """
    if t < 1:
        raise ValueError("t must be >= 1")
    if a < 0:
        raise ValueError("a must be >= 0")
    return 2.0 * math.exp(-2.0 * a * a / t)


@dataclass
class RoundingReport:
    """Best rounding found plus the concentration context it was judged in.

    mu is each agent's exact multilinear value of the first color column;
    column_spread records how far the columns disagree (the splitter only
    guarantees approximate equality), and widens the error bar on
    realized_disc accordingly.
    """

    coloring: np.ndarray
    realized_disc: float
    mu: np.ndarray
    bound_predicted: float
    trials_used: int
    column_spread: float
    fractional_count: int
    argmax_agent: int | None = None
    argmax_colors: tuple | None = None

    def to_jsonable(self) -> dict:
        return {
            "coloring": self.coloring.tolist(),
            "realized_disc": self.realized_disc,
            "mu": self.mu.tolist(),
            "bound_predicted": self.bound_predicted,
            "trials_used": self.trials_used,
            "column_spread": self.column_spread,
            "fractional_count": self.fractional_count,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_jsonable(), fh, indent=2)


def round_best_of(V, chi, trials: int = 64, seed: int = 0) -> RoundingReport:
    """Round `trials` times independently and keep the lowest-discrepancy draw.

    A single rounding already meets the predicted bound with positive
    probability; taking the best of a few dozen makes that reliable at
    negligible cost.  Deterministic given (seed, trials); ties go to the
    earliest trial.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    arr = check_fractional_coloring(chi)
    m, k = arr.shape
    n = len(V)
    if n < 1:
        raise ValueError("need at least one valuation")
    for v in V:
        if v.m != m:
            raise ValueError("valuation item count does not match the coloring")

    values = column_values(V, arr)  # raises CapacityError beyond the exact cap
    mu = values[:, 0].copy()
    column_spread = float(np.max(values.max(axis=1) - values.min(axis=1)))
    t = int(fractional_counts(arr).max())
    bound = math.sqrt(BOUND_CONSTANT * t * math.log(n * k)) if n * k > 1 else 0.0

    seqs = np.random.SeedSequence([int(seed), _ROUND_STREAM]).spawn(trials)
    best = None
    for seq in seqs:
        coloring = round_once(arr, seq)
        d = measures.disc_of_coloring(V, k, coloring)
        if best is None or d.value < best[0].value:
            best = (d, coloring)
    d, coloring = best
    return RoundingReport(
        coloring=coloring,
        realized_disc=d.value,
        mu=mu,
        bound_predicted=float(bound),
        trials_used=trials,
        column_spread=column_spread,
        fractional_count=t,
        argmax_agent=d.argmax_agent,
        argmax_colors=d.argmax_colors,
    )
