"""Valuation oracles: deterministic set functions with bounded marginals.

A valuation assigns a real value to every subset of an item set of size m.
Subsets are bitmask-encoded ints (see :mod:`fairdisc.bitsets`).  Every oracle
declares a marginal bound L with |v(S + j) - v(S)| <= L for all S and j; the
bound is what feeds the concentration analysis downstream, so generators in
this module rescale their output to L = 1.
"""
from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .bitsets import MAX_ITEMS, bits, full_mask
from .errors import CapacityError, InvariantViolation

TABLE_CAP = 20        # 2^20 table entries is the practical memory limit
EXHAUSTIVE_CAP = 20   # exhaustive marginal verification enumerates m * 2^m pairs

FAMILIES = ("additive-uniform", "additive-signed", "coverage", "table-random-lipschitz")

INSTANCE_FORMAT = "valuation-instances"


class ValuationOracle:
    """Black-box set function with a declared bound on its marginals.

    Subclasses implement ``value(subset)``, which must be deterministic.
    A subclass may additionally provide ``extension(x)``: the closed-form
    expected value of ``value(S)`` when item j enters S independently with
    probability ``x[j]``.  When absent, callers fall back to enumeration.
    """

    kind = "custom"

    def __init__(self, m: int, marginal_bound: float):
        if not 1 <= int(m) <= MAX_ITEMS:
            raise ValueError(f"item count must be in 1..{MAX_ITEMS}, got {m}")
        bound = float(marginal_bound)
        if not np.isfinite(bound) or bound < 0:
            raise ValueError(f"marginal bound must be finite and non-negative, got {bound}")
        self.m = int(m)
        self.marginal_bound = bound

    def value(self, subset: int) -> float:
        raise NotImplementedError

    def check_subset(self, subset: int) -> int:
        subset = int(subset)
        if not 0 <= subset <= full_mask(self.m):
            raise ValueError(f"subset {subset:#x} references item indices >= m={self.m}")
        return subset

    def __repr__(self):
        return f"{type(self).__name__}(m={self.m}, L={self.marginal_bound:g})"


class AdditiveValuation(ValuationOracle):
    """v(S) = sum of per-item weights over S.

    >>> AdditiveValuation([1.0, -0.5, 2.0]).value(0b101)
    3.0
    """

    kind = "additive"

    def __init__(self, weights: Sequence[float], marginal_bound: float | None = None):
        w = np.array(weights, dtype=float)
        if w.ndim != 1 or w.size == 0:
            raise ValueError("weights must be a non-empty 1-d sequence")
        if marginal_bound is None:
            marginal_bound = float(np.max(np.abs(w)))
        super().__init__(w.size, marginal_bound)
        w.setflags(write=False)
        self.weights = w

    def value(self, subset: int) -> float:
        idx = bits(self.check_subset(subset))
        return float(self.weights[idx].sum()) if idx else 0.0

    def extension(self, x: np.ndarray) -> float:
        return float(self.weights @ x)


class TableValuation(ValuationOracle):
    """Explicit value table over all 2^m subsets, indexed by bitmask.

    The table makes brute-force oracles cheap; m is capped at TABLE_CAP.
    When no marginal bound is declared, the exact maximum marginal is
    measured from the table.
    """

    kind = "table"

    def __init__(self, table: Sequence[float], marginal_bound: float | None = None):
        t = np.array(table, dtype=float).ravel()
        m = int(t.size).bit_length() - 1
        if t.size < 2 or (1 << m) != t.size:
            raise ValueError(f"table length must be a power of two >= 2, got {t.size}")
        if m > TABLE_CAP:
            raise CapacityError(f"table valuation capped at m={TABLE_CAP}, got m={m}")
        t.setflags(write=False)
        self.table = t
        if marginal_bound is None:
            marginal_bound = _table_max_marginal(t, m)
        super().__init__(m, marginal_bound)

    def value(self, subset: int) -> float:
        return float(self.table[self.check_subset(subset)])


def _table_max_marginal(table: np.ndarray, m: int) -> float:
    idx = np.arange(table.size)
    best = 0.0
    for j in range(m):
        bit = 1 << j
        lo = idx[(idx & bit) == 0]
        if lo.size:
            best = max(best, float(np.max(np.abs(table[lo | bit] - table[lo]))))
    return best


class CoverageValuation(ValuationOracle):
    """Weighted coverage: value of S is the total weight of universe elements
    covered by the union of the chosen items' element sets.  Monotone; the
    exact maximum marginal is the largest single item's total weight
    (achieved when that item is added to the empty set).
    """

    kind = "coverage"

    def __init__(
        self,
        universe_size: int,
        item_sets: Sequence[Sequence[int]],
        element_weights: Sequence[float],
        marginal_bound: float | None = None,
    ):
        U = int(universe_size)
        if U < 1:
            raise ValueError("universe must contain at least one element")
        w = np.array(element_weights, dtype=float)
        if w.shape != (U,):
            raise ValueError(f"element_weights must have length {U}")
        if (w < 0).any():
            raise ValueError("element weights must be non-negative")
        m = len(item_sets)
        covers = np.zeros((U, m), dtype=bool)
        for j, elems in enumerate(item_sets):
            for e in elems:
                if not 0 <= int(e) < U:
                    raise ValueError(f"item {j} covers element {e} outside universe of size {U}")
                covers[int(e), j] = True
        if marginal_bound is None:
            marginal_bound = float(np.max(w @ covers)) if m else 0.0
        super().__init__(m, marginal_bound)
        w.setflags(write=False)
        covers.setflags(write=False)
        self.element_weights = w
        self.covers = covers

    @property
    def universe_size(self) -> int:
        return self.covers.shape[0]

    def item_sets(self) -> list:
        return [list(np.flatnonzero(self.covers[:, j])) for j in range(self.m)]

    def value(self, subset: int) -> float:
        idx = bits(self.check_subset(subset))
        if not idx:
            return 0.0
        covered = self.covers[:, idx].any(axis=1)
        return float(self.element_weights[covered].sum())

    def extension(self, x: np.ndarray) -> float:
        missed = np.prod(np.where(self.covers, 1.0 - np.asarray(x)[None, :], 1.0), axis=1)
        return float(self.element_weights @ (1.0 - missed))

    def _covers_float(self) -> np.ndarray:
        cf = getattr(self, "_covers_f", None)
        if cf is None:
            cf = self.covers.astype(float)
            self._covers_f = cf
        return cf

    def extension_columns(self, chi: np.ndarray) -> np.ndarray:
        """extension() of every column of an m-by-k matrix at once.

        Log-space matmul form of the survival product; float-exact only to
        ~1e-13 relative, meant for search loops (final values go through
        extension()).
        """
        lg = np.log(np.maximum(1.0 - chi, 1e-300))
        missed = np.exp(self._covers_float() @ lg)
        return self.element_weights @ (1.0 - missed)

    def extension_grad_items(self, x: np.ndarray, items) -> dict:
        """dF/dx_j for the requested items at x (exact coverage partials)."""
        lg = np.log(np.maximum(1.0 - np.asarray(x, dtype=float), 1e-300))
        cf = self._covers_float()
        base = cf @ lg
        out = {}
        for j in items:
            excl = np.exp(base - cf[:, j] * lg[j])
            out[int(j)] = float(self.element_weights @ (cf[:, j] * excl))
        return out


class CallableValuation(ValuationOracle):
    """Wrap an arbitrary deterministic subset function as an oracle."""

    def __init__(self, fn: Callable[[int], float], m: int, marginal_bound: float, kind: str = "custom"):
        super().__init__(m, marginal_bound)
        self._fn = fn
        self.kind = kind

    def value(self, subset: int) -> float:
        return float(self._fn(self.check_subset(subset)))


@dataclass(frozen=True)
class MarginalReport:
    """Outcome of a marginal-bound audit."""

    max_observed: float
    witness_subset: int
    witness_item: int
    violation: bool
    mode: str
    checked: int


def verify_marginal_bound(
    v: ValuationOracle,
    mode: str = "exhaustive",
    samples: int = 10_000,
    seed: int = 0,
) -> MarginalReport:
    """Audit |v(S+j) - v(S)| against the declared bound.

    Exhaustive mode scans every (S, j) pair with j outside S and returns the
    true maximum; it is limited to m <= EXHAUSTIVE_CAP.  Sampled mode draws
    `samples` uniform pairs.  The report flags a violation whenever the
    observed maximum exceeds the declared bound.
    """
    best = 0.0
    witness = (0, 0)
    if mode == "exhaustive":
        if v.m > EXHAUSTIVE_CAP:
            raise CapacityError(
                f"exhaustive verification capped at m={EXHAUSTIVE_CAP}, got m={v.m}; use mode='sampled'"
            )
        checked = 0
        for S in range(1 << v.m):
            base = v.value(S)
            for j in range(v.m):
                bit = 1 << j
                if S & bit:
                    continue
                d = abs(v.value(S | bit) - base)
                checked += 1
                if d > best:
                    best, witness = d, (S, j)
    elif mode == "sampled":
        if samples < 1:
            raise ValueError("samples must be >= 1")
        rng = np.random.default_rng(seed)
        checked = samples
        for _ in range(samples):
            S = int(rng.integers(0, 1 << v.m)) if v.m < 63 else _random_mask(rng, v.m)
            j = int(rng.integers(v.m))
            S &= ~(1 << j)
            d = abs(v.value(S | (1 << j)) - v.value(S))
            if d > best:
                best, witness = d, (S, j)
    else:
        raise ValueError(f"unknown mode {mode!r}; expected 'exhaustive' or 'sampled'")
    return MarginalReport(
        max_observed=best,
        witness_subset=witness[0],
        witness_item=witness[1],
        violation=best > v.marginal_bound,
        mode=mode,
        checked=checked,
    )


def _random_mask(rng: np.random.Generator, m: int) -> int:
    mask = 0
    for j in range(m):
        if rng.integers(2):
            mask |= 1 << j
    return mask


def random_instance(family: str, n: int, m: int, seed: int, **params) -> list:
    """Generate n seeded oracles of one family, each with marginal bound ~1.

    Families: additive-uniform (weights in [0,1)), additive-signed (weights in
    [-1,1]), coverage (random weighted set cover, weights rescaled so the
    largest item marginal is 1), table-random-lipschitz (gaussian table
    rescaled by its measured maximum marginal).  A fixed seed fixes every
    random draw.
    """
    if family not in FAMILIES:
        raise ValueError(f"unknown family {family!r}; expected one of {FAMILIES}")
    if n < 1 or m < 1:
        raise ValueError("n and m must be >= 1")
    rng = np.random.default_rng(seed)
    oracles = []
    for _ in range(n):
        if family == "additive-uniform":
            oracles.append(AdditiveValuation(rng.random(m), marginal_bound=1.0))
        elif family == "additive-signed":
            oracles.append(AdditiveValuation(rng.uniform(-1.0, 1.0, m), marginal_bound=1.0))
        elif family == "coverage":
            oracles.append(_random_coverage(rng, m, params))
        else:
            oracles.append(_random_table(rng, m))
    return oracles


def _random_coverage(rng: np.random.Generator, m: int, params: dict) -> CoverageValuation:
    U = int(params.get("universe_size", 2 * m))
    density = float(params.get("density", 0.35))
    covers = rng.random((U, m)) < density
    for j in np.flatnonzero(~covers.any(axis=0)):
        covers[rng.integers(U), j] = True  # every item must cover something
    weights = rng.random(U)
    weights /= float(np.max(weights @ covers))
    item_sets = [np.flatnonzero(covers[:, j]) for j in range(m)]
    return CoverageValuation(U, item_sets, weights)


def _random_table(rng: np.random.Generator, m: int) -> TableValuation:
    if m > TABLE_CAP:
        raise CapacityError(f"table-random-lipschitz capped at m={TABLE_CAP}, got m={m}")
    table = rng.standard_normal(1 << m)
    scale = _table_max_marginal(table, m)
    if scale == 0.0:  # constant table: probability zero, but fail loudly
        raise InvariantViolation("degenerate constant random table")
    return TableValuation(table / scale)


# --- serialization -----------------------------------------------------------
#
# One JSON document per instance list.  Floats survive the round trip
# bit-exactly because json emits repr(float).

def oracle_to_jsonable(v: ValuationOracle) -> dict:
    if isinstance(v, AdditiveValuation):
        return {"kind": v.kind, "marginal_bound": v.marginal_bound, "weights": v.weights.tolist()}
    if isinstance(v, TableValuation):
        return {"kind": v.kind, "marginal_bound": v.marginal_bound, "table": v.table.tolist()}
    if isinstance(v, CoverageValuation):
        return {
            "kind": v.kind,
            "marginal_bound": v.marginal_bound,
            "universe_size": v.universe_size,
            "item_sets": [[int(e) for e in s] for s in v.item_sets()],
            "element_weights": v.element_weights.tolist(),
        }
    raise ValueError(f"oracle of kind {v.kind!r} has no serializable defining data")


def oracle_from_jsonable(doc: dict) -> ValuationOracle:
    kind = doc.get("kind")
    if kind == "additive":
        return AdditiveValuation(doc["weights"], marginal_bound=doc["marginal_bound"])
    if kind == "table":
        return TableValuation(doc["table"], marginal_bound=doc["marginal_bound"])
    if kind == "coverage":
        return CoverageValuation(
            doc["universe_size"], doc["item_sets"], doc["element_weights"],
            marginal_bound=doc["marginal_bound"],
        )
    raise ValueError(f"cannot reconstruct oracle of kind {kind!r}")


def dumps_instances(oracles: Sequence[ValuationOracle], family: str | None = None,
                    seed: int | None = None, params: dict | None = None) -> str:
    doc = {
        "format": INSTANCE_FORMAT,
        "version": 1,
        "family": family,
        "seed": seed,
        "params": params or {},
        "count": len(oracles),
        "oracles": [oracle_to_jsonable(v) for v in oracles],
    }
    return json.dumps(doc, indent=2)


def loads_instances(text: str) -> tuple:
    doc = json.loads(text)
    if doc.get("format") != INSTANCE_FORMAT:
        raise ValueError(f"not a {INSTANCE_FORMAT} document")
    oracles = [oracle_from_jsonable(d) for d in doc["oracles"]]
    meta = {key: doc.get(key) for key in ("family", "seed", "params")}
    return oracles, meta


def save_instances(path, oracles, family=None, seed=None, params=None) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(dumps_instances(oracles, family=family, seed=seed, params=params))


def load_instances(path) -> tuple:
    with open(path, encoding="utf-8") as fh:
        return loads_instances(fh.read())
