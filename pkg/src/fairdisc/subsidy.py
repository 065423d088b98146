"""Envy-free allocations with payments, driven by low-discrepancy bundles.

An allocation is envy-freeable exactly when it maximizes welfare over all
bundle reassignments, equivalently when its envy graph (arc weight = how
much agent i prefers j's bundle to its own) has no positive-weight cycle.
The minimal payments set each agent's subsidy to the maximum weight of any
path leaving it, which the absence of positive cycles makes well-defined.
Starting from bundles of a low-discrepancy n-coloring, every payment is at
most the coloring's discrepancy D and the total at most (n-1) * D.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .bitsets import full_mask
from .errors import InvariantViolation, PositiveCycleError
from .measures import bundles_of_coloring, disc_of_coloring

PAYMENT_TOL = 1e-9  # slack on all payment/envy inequalities (oracle values are reals)


@dataclass(frozen=True)
class Allocation:
    """Ordered partition of the items: bundles[i] is agent i's bitmask."""

    bundles: tuple
    m: int

    def __post_init__(self):
        bundles = tuple(int(b) for b in self.bundles)
        object.__setattr__(self, "bundles", bundles)
        union = 0
        for b in bundles:
            if b & union:
                raise ValueError("bundles must be disjoint")
            union |= b
        if union != full_mask(self.m):
            raise ValueError("bundles must cover all items")

    @property
    def n(self) -> int:
        return len(self.bundles)


@dataclass(frozen=True)
class EnvyGraph:
    """Complete weighted digraph on agents; w[i][j] = v_i(A_j) - v_i(A_i)."""

    w: np.ndarray

    def __post_init__(self):
        arr = np.array(self.w, dtype=float)
        if arr.ndim != 2 or arr.shape[0] != arr.shape[1]:
            raise ValueError("envy graph needs a square weight matrix")
        np.fill_diagonal(arr, 0.0)
        arr.setflags(write=False)
        object.__setattr__(self, "w", arr)

    @property
    def n(self) -> int:
        return self.w.shape[0]


@dataclass(frozen=True)
class PaymentVector:
    """Non-negative payments with at least one zero entry."""

    p: np.ndarray

    def __post_init__(self):
        arr = np.array(self.p, dtype=float)
        arr.setflags(write=False)
        object.__setattr__(self, "p", arr)

    @property
    def total(self) -> float:
        return float(self.p.sum())


def welfare(V, bundles) -> float:
    """Total value when agent i keeps bundles[i]."""
    return float(sum(v.value(b) for v, b in zip(V, bundles)))


def best_reassignment(V, bundles) -> Allocation:
    """Welfare-maximizing reassignment of the given bundles to the agents.

    Exact optimal matching on the n-by-n value matrix; among optimal
    assignments the lexicographically smallest is returned, so results are
    reproducible.
    """
    n = len(V)
    if len(bundles) != n:
        raise ValueError("need exactly one bundle per agent")
    m = V[0].m
    Allocation(tuple(bundles), m)  # validates the partition
    C = np.array([[v.value(b) for b in bundles] for v in V])
    sigma = _lexmin_optimal_assignment(C)
    return Allocation(tuple(bundles[sigma[i]] for i in range(n)), m)


def _lexmin_optimal_assignment(C: np.ndarray, tol: float = PAYMENT_TOL) -> list:
    """Lexicographically smallest welfare-maximizing assignment.

    Fixes agents one by one to the smallest bundle index whose best
    completion still reaches the optimum (within tol, to absorb float
    noise in equal-welfare ties).
    """
    from scipy.optimize import linear_sum_assignment

    n = C.shape[0]

    def best_total(rows, cols, fixed_sum):
        if not rows:
            return fixed_sum
        sub = C[np.ix_(rows, cols)]
        ri, ci = linear_sum_assignment(sub, maximize=True)
        return fixed_sum + float(sub[ri, ci].sum())

    target = best_total(list(range(n)), list(range(n)), 0.0)
    sigma = []
    free = list(range(n))
    fixed_sum = 0.0
    for i in range(n):
        for b in free:
            rest = [c for c in free if c != b]
            if best_total(list(range(i + 1, n)), rest, fixed_sum + float(C[i, b])) >= target - tol:
                sigma.append(b)
                free = rest
                fixed_sum += float(C[i, b])
                break
        else:
            raise InvariantViolation("no completion reached the optimal welfare")
    return sigma


def build_envy_graph(V, alloc: Allocation) -> EnvyGraph:
    """Exact envy weights from one oracle call per (agent, bundle) pair."""
    n = alloc.n
    if len(V) != n:
        raise ValueError("allocation size does not match the agent count")
    vals = np.array([[v.value(b) for b in alloc.bundles] for v in V])
    w = vals - np.diag(vals)[:, None]
    return EnvyGraph(w)


def has_positive_cycle(g: EnvyGraph, tol: float = PAYMENT_TOL):
    """Detect a directed cycle of total weight > tol.

    Longest-walk relaxation from an all-zero potential; a relaxation that
    still fires after n rounds witnesses a positive cycle, which is then
    extracted and verified (so float noise below tol never reports one).
    Returns (flag, cycle-as-vertex-list-or-None).
    """
    w = g.w
    n = g.n
    dist = np.zeros(n)
    pred = np.full(n, -1)
    candidates = []
    for round_idx in range(n + 1):
        updated = False
        for i in range(n):
            for j in range(n):
                if i == j:
                    continue
                cand = dist[i] + w[i, j]
                if cand > dist[j] + 1e-15:
                    dist[j] = cand
                    pred[j] = i
                    updated = True
                    if round_idx == n:
                        candidates.append(j)
        if not updated:
            return False, None
    for start in candidates:
        cycle = _extract_cycle(pred, start, n)
        if cycle is not None:
            weight = sum(w[cycle[s], cycle[s + 1]] for s in range(len(cycle) - 1))
            if weight > tol:
                return True, cycle[:-1]
    return False, None


def _extract_cycle(pred, start, n):
    node = start
    for _ in range(n):
        node = pred[node]
        if node < 0:
            return None
    cycle = [node]
    cur = pred[node]
    while cur != node:
        cycle.append(cur)
        cur = pred[cur]
    cycle.append(node)
    cycle.reverse()
    return cycle


def compute_payments(g: EnvyGraph, tol: float = PAYMENT_TOL) -> PaymentVector:
    """Minimal envy-eliminating payments: p_i = max path weight leaving i.

    The empty path (weight 0) is allowed, so payments are non-negative and
    the agent with no positive outgoing path pays exactly zero.  Requires a
    graph with no positive cycle; with that, simple paths suffice and n-1
    relaxation rounds converge.
    """
    flag, cycle = has_positive_cycle(g, tol)
    if flag:
        raise PositiveCycleError(f"positive-weight cycle {cycle} admits no envy-free payments")
    w = g.w
    n = g.n
    p = np.zeros(n)
    for _ in range(max(n - 1, 1)):
        nxt = np.maximum(0.0, (w + p[None, :]).max(axis=1))
        if np.array_equal(nxt, p):
            break
        p = nxt
    return PaymentVector(p)


def envy_violation(V, alloc: Allocation, p: np.ndarray) -> float:
    """Largest violation of v_i(A_i) + p_i >= v_i(A_j) + p_j (0 if envy-free)."""
    vals = np.array([[v.value(b) for b in alloc.bundles] for v in V])
    own = np.diag(vals)
    worst = 0.0
    for i in range(alloc.n):
        for j in range(alloc.n):
            if i != j:
                worst = max(worst, (vals[i, j] + p[j]) - (own[i] + p[i]))
    return float(worst)


@dataclass
class SubsidyReport:
    """Audit record for one envy-free-with-subsidy run."""

    allocation: Allocation
    payments: PaymentVector
    disc: float
    total_payment: float
    max_payment: float
    envy_graph: EnvyGraph
    max_envy_violation: float

    def to_jsonable(self) -> dict:
        return {
            "bundles": [b for b in self.allocation.bundles],
            "payments": self.payments.p.tolist(),
            "disc": self.disc,
            "total_payment": self.total_payment,
            "max_payment": self.max_payment,
            "envy_weights": self.envy_graph.w.tolist(),
            "max_envy_violation": self.max_envy_violation,
        }

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8") as fh:
            json.dump(self.to_jsonable(), fh, indent=2)


def envy_free_with_subsidy(V, coloring):
    """Full chain from an n-coloring: reassign bundles for maximum welfare,
    verify the no-positive-cycle characterization, compute minimal payments,
    and check every payment against the coloring's discrepancy D
    (p_i <= D, total <= (n-1) D, both within PAYMENT_TOL).

    Returns (allocation, payments, report).  A positive cycle after the
    welfare-maximizing reassignment, or a failed payment bound, raises
    InvariantViolation: the characterization is exact, so either signals a
    bug rather than bad input.
    """
    n = len(V)
    bundles = bundles_of_coloring(coloring, n)
    alloc = best_reassignment(V, bundles)
    g = build_envy_graph(V, alloc)
    flag, cycle = has_positive_cycle(g)
    if flag:
        raise InvariantViolation(
            f"welfare-maximizing reassignment left a positive envy cycle {cycle}"
        )
    payments = compute_payments(g)
    D = disc_of_coloring(V, n, coloring).value
    violation = envy_violation(V, alloc, payments.p)
    if violation > PAYMENT_TOL:
        raise InvariantViolation(f"payments leave envy of {violation}")
    if float(payments.p.max()) > D + PAYMENT_TOL:
        raise InvariantViolation(
            f"payment {payments.p.max()} exceeds the coloring discrepancy {D}"
        )
    if payments.total > (n - 1) * D + PAYMENT_TOL:
        raise InvariantViolation(
            f"total payment {payments.total} exceeds (n-1) * disc = {(n - 1) * D}"
        )
    report = SubsidyReport(
        allocation=alloc,
        payments=payments,
        disc=D,
        total_payment=payments.total,
        max_payment=float(payments.p.max()),
        envy_graph=g,
        max_envy_violation=violation,
    )
    return alloc, payments, report
