"""Multilinear extension of a valuation: F(x) = E[v(S)] with each item j
included in S independently with probability x[j].

Exact evaluation enumerates only the fractional coordinates of x (integral
coordinates are folded into a fixed base set), so its cost is 2^t oracle
calls for t fractional entries; t is capped at SUPPORT_CAP.  Beyond the cap,
use Monte Carlo estimation.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bitsets import mask_of
from .errors import CapacityError

SNAP_TOL = 1e-12   # coordinates this close to 0/1 are treated as integral
SUPPORT_CAP = 24   # 2^24 oracle calls is the per-evaluation compute budget

_MC_STREAM = 0x4D43  # seed-domain tag keeping MC draws independent of other seeded ops


def as_probability_vector(x, m: int | None = None) -> np.ndarray:
    """Validate and copy x as a 1-d float vector with entries in [0, 1]."""
    arr = np.array(x, dtype=float)
    if arr.ndim != 1:
        raise ValueError("fractional vector must be 1-d")
    if m is not None and arr.size != m:
        raise ValueError(f"fractional vector has length {arr.size}, expected {m}")
    if ((arr < -SNAP_TOL) | (arr > 1.0 + SNAP_TOL)).any():
        raise ValueError("fractional coordinates must lie in [0, 1]")
    np.clip(arr, 0.0, 1.0, out=arr)
    return arr


def snap_integral(x: np.ndarray) -> np.ndarray:
    """Snap coordinates within SNAP_TOL of 0 or 1 to exactly 0 or 1."""
    out = np.array(x, dtype=float)
    out[out <= SNAP_TOL] = 0.0
    out[out >= 1.0 - SNAP_TOL] = 1.0
    return out


def fractional_support(x) -> np.ndarray:
    """Indices j with 0 < x[j] < 1 after snapping."""
    xs = snap_integral(np.asarray(x, dtype=float))
    return np.flatnonzero((xs > 0.0) & (xs < 1.0))


def eval_exact(v, x) -> float:
    """Exact multilinear value, up to floating point.

    Enumerates subsets of the fractional support on top of the base set of
    coordinates fixed at 1.  Raises CapacityError when the support exceeds
    SUPPORT_CAP; estimate with eval_mc in that case.
    """
    xs = snap_integral(as_probability_vector(x, v.m))
    support = np.flatnonzero((xs > 0.0) & (xs < 1.0))
    t = support.size
    if t > SUPPORT_CAP:
        raise CapacityError(
            f"fractional support {t} exceeds exact-evaluation cap {SUPPORT_CAP}; use eval_mc"
        )
    if hasattr(v, "extension"):
        return float(v.extension(xs))
    base = mask_of(np.flatnonzero(xs == 1.0))
    if t == 0:
        return v.value(base)
    p_in = xs[support]
    p_out = 1.0 - p_in
    support_bits = [1 << int(j) for j in support]
    probs = None
    if t <= 20:  # precomputed subset probabilities; above this the array gets large
        probs = np.ones(1)
        for p in p_in:
            probs = np.concatenate([probs * (1.0 - p), probs * p])
    total = 0.0
    for idx in range(1 << t):
        mask = base
        rem = idx
        s = 0
        pr = 1.0
        while rem:
            if rem & 1:
                mask |= support_bits[s]
                if probs is None:
                    pr *= p_in[s]
            elif probs is None:
                pr *= p_out[s]
            rem >>= 1
            s += 1
        if probs is None:
            while s < t:
                pr *= p_out[s]
                s += 1
        else:
            pr = probs[idx]
        total += pr * v.value(mask)
    return float(total)


@dataclass(frozen=True)
class McEstimate:
    """Monte Carlo mean with a conservative 95% Hoeffding half-width.

    The half-width uses the value range implied by L*m; it is reported, not
    certified (the true range may be far smaller).
    """

    mean: float
    half_width: float
    trials: int


def eval_mc(v, x, trials: int, seed: int = 0, workers: int = 1) -> McEstimate:
    """Estimate F(x) from `trials` independent samples S ~ x.

    Trials are partitioned into `workers` chunks with independently derived
    seeds and combined in fixed order, so the result depends only on
    (seed, workers) regardless of how chunks are scheduled.
    """
    if trials < 1:
        raise ValueError("trials must be >= 1")
    if workers < 1:
        raise ValueError("workers must be >= 1")
    xs = as_probability_vector(x, v.m)
    seqs = np.random.SeedSequence([int(seed), _MC_STREAM]).spawn(workers)
    base, rem = divmod(trials, workers)
    total = 0.0
    for w, seq in enumerate(seqs):
        size = base + (1 if w < rem else 0)
        if size == 0:
            continue
        rng = np.random.default_rng(seq)
        draws = rng.random((size, v.m)) < xs[None, :]
        packed = np.packbits(draws, axis=1, bitorder="little")
        for row in packed:
            total += v.value(int.from_bytes(row.tobytes(), "little"))
    mean = total / trials
    value_range = v.marginal_bound * v.m
    half_width = value_range * math.sqrt(math.log(2.0 / 0.05) / (2.0 * trials))
    return McEstimate(mean=float(mean), half_width=float(half_width), trials=trials)
