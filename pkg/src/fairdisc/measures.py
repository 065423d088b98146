"""Discrepancy and transfer-based fairness measures of integral colorings.

disc: largest value gap any agent sees between two color classes.
transfer imbalance T(A, B): fewest items to move between two disjoint
bundles so the (weakly) poorer one catches up; it stays meaningful for
unbounded or non-monotone valuations where the raw value gap does not.
The signed variant v'(S) = +-T(S, complement) is 1-Lipschitz in Hamming
distance and anti-symmetric, which is what lets the discrepancy machinery
run on it with unit marginal bound.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations

import numpy as np

from .bitsets import bits, full_mask, mask_of, popcount
from .errors import CapacityError
from .valuations import ValuationOracle

BRUTEFORCE_CAP = 10_000_000  # k^m colorings enumerated at most
TRANSFER_CAP = 22            # |A| + |B| cap for transfer enumeration


@dataclass(frozen=True)
class DiscrepancyValue:
    """A discrepancy figure with the agent/color pair realizing it."""

    value: float
    argmax_agent: int | None = None
    argmax_colors: tuple | None = None


@dataclass(frozen=True)
class TransferValue:
    """Minimum transfer count with a witnessing pair of moved sets.

    moved_from_richer leaves the weakly richer bundle, moved_from_poorer
    leaves the poorer one; `swapped` records that B was the richer side of
    the original call.
    """

    value: int
    moved_from_richer: int
    moved_from_poorer: int
    swapped: bool


def bundles_of_coloring(coloring, k: int) -> list:
    """Bitmask bundle per color from an integral coloring vector."""
    colors = np.asarray(coloring, dtype=int)
    if colors.ndim != 1:
        raise ValueError("coloring must be a 1-d vector of colors")
    if ((colors < 0) | (colors >= k)).any():
        raise ValueError(f"colors must lie in 0..{k - 1}")
    return [mask_of(np.flatnonzero(colors == l)) for l in range(k)]


def disc_of_coloring(V, k: int, coloring) -> DiscrepancyValue:
    """Exact discrepancy of one coloring: max over agents and color pairs."""
    if len(np.asarray(coloring)) != V[0].m:
        raise ValueError("coloring length does not match the item count")
    bundles = bundles_of_coloring(coloring, k)
    if k < 2:
        return DiscrepancyValue(0.0)
    values = np.array([[v.value(b) for b in bundles] for v in V])
    best = DiscrepancyValue(-1.0)
    for i in range(len(V)):
        for l, lp in combinations(range(k), 2):
            gap = abs(values[i, l] - values[i, lp])
            if gap > best.value:
                best = DiscrepancyValue(float(gap), i, (l, lp))
    return best


def disc_opt_bruteforce(V, k: int) -> DiscrepancyValue:
    """Optimal discrepancy by enumerating all k^m colorings (ground truth).

    Capacity-guarded at BRUTEFORCE_CAP enumerations; intended as the oracle
    that upper-level results are checked against on small instances.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    m = V[0].m
    if any(v.m != m for v in V):
        raise ValueError("all valuations must share the same item count")
    if k == 1:
        return DiscrepancyValue(0.0)
    if k ** m > BRUTEFORCE_CAP:
        raise CapacityError(f"k^m = {k ** m} exceeds the brute-force cap {BRUTEFORCE_CAP}")
    best = None
    coloring = np.zeros(m, dtype=int)
    while True:
        cand = disc_of_coloring(V, k, coloring)
        if best is None or cand.value < best.value:
            best = cand
        j = 0
        while j < m and coloring[j] == k - 1:
            coloring[j] = 0
            j += 1
        if j == m:
            break
        coloring[j] += 1
    return best


def transfer_imbalance(v: ValuationOracle, A: int, B: int) -> TransferValue:
    """Fewest moved items making the poorer bundle weakly richer.

    With R the weakly richer of (A, B) and P the other, finds the smallest
    |S| + |S'| with S inside R and S' inside P such that after swapping them
    across, the side that received S is at least as valuable.  Enumerates by
    total moved count, so the witness is minimal.
    """
    A = v.check_subset(A)
    B = v.check_subset(B)
    if A & B:
        raise ValueError("bundles must be disjoint")
    if popcount(A | B) > TRANSFER_CAP:
        raise CapacityError(
            f"transfer enumeration capped at {TRANSFER_CAP} items, got {popcount(A | B)}"
        )
    if v.value(A) >= v.value(B):
        rich, poor, swapped = A, B, False
    else:
        rich, poor, swapped = B, A, True
    rich_items = bits(rich)
    poor_items = bits(poor)
    for total in range(len(rich_items) + len(poor_items) + 1):
        for s_rich in range(max(0, total - len(poor_items)), min(total, len(rich_items)) + 1):
            s_poor = total - s_rich
            for S in combinations(rich_items, s_rich):
                Sm = mask_of(S)
                for Sp in combinations(poor_items, s_poor):
                    Spm = mask_of(Sp)
                    if v.value((rich ^ Sm) | Spm) <= v.value((poor ^ Spm) | Sm):
                        return TransferValue(total, Sm, Spm, swapped)
    raise AssertionError("unreachable: swapping the full bundles always succeeds")


def transfer_disc_of_coloring(V, k: int, coloring) -> DiscrepancyValue:
    """Worst transfer imbalance over agents and color pairs."""
    if len(np.asarray(coloring)) != V[0].m:
        raise ValueError("coloring length does not match the item count")
    bundles = bundles_of_coloring(coloring, k)
    if k < 2:
        return DiscrepancyValue(0.0)
    best = DiscrepancyValue(-1.0)
    for i, v in enumerate(V):
        for l, lp in combinations(range(k), 2):
            t = transfer_imbalance(v, bundles[l], bundles[lp]).value
            if t > best.value:
                best = DiscrepancyValue(float(t), i, (l, lp))
    return best


class TransferValuation(ValuationOracle):
    """Signed transfer imbalance against the complement, as an oracle.

    value(S) = +T(S, S^c) when v(S) >= v(S^c) and -T(S, S^c) otherwise.
    The unsigned T moves by at most 1 per item flip, but the sign can cross
    zero between neighbors that each still need one move, so the signed
    value is 2-Lipschitz (tight: base table [1, .2, .4, .5] steps from +1
    to -1).  The declared marginal bound is therefore 2.  Values are cached
    (each evaluation costs a transfer enumeration).
    """

    kind = "transfer-derived"

    def __init__(self, base: ValuationOracle):
        if base.m > TRANSFER_CAP:
            raise CapacityError(
                f"transfer-derived oracle capped at m={TRANSFER_CAP}, got m={base.m}"
            )
        super().__init__(base.m, 2.0)
        self.base = base
        self._cache: dict = {}

    def value(self, subset: int) -> float:
        S = self.check_subset(subset)
        hit = self._cache.get(S)
        if hit is not None:
            return hit
        comp = full_mask(self.m) ^ S
        t = transfer_imbalance(self.base, S, comp).value
        sign = 1.0 if self.base.value(S) >= self.base.value(comp) else -1.0
        out = sign * t
        self._cache[S] = out
        self._cache[comp] = -out  # anti-symmetry
        return out


def vprime_transform(v: ValuationOracle) -> TransferValuation:
    """Wrap a valuation as its signed-transfer derivative (marginal bound 2)."""
    return TransferValuation(v)
