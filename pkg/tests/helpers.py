"""Independent brute-force oracles used to check library results.

Everything here recomputes from definitions, deliberately avoiding the
library's own code paths (support restriction, closed forms, graph
algorithms), so tests compare two genuinely different routes.
"""
import itertools

import numpy as np

from fairdisc.bitsets import bits, full_mask, mask_of, popcount


def mle_bruteforce(v, x):
    """Multilinear value by enumerating all 2^m subsets over all coordinates."""
    x = np.asarray(x, dtype=float)
    total = 0.0
    for S in range(1 << v.m):
        p = 1.0
        for j in range(v.m):
            p *= x[j] if (S >> j) & 1 else 1.0 - x[j]
        if p:
            total += p * v.value(S)
    return total


def transfer_bruteforce(v, A, B):
    """Literal transfer-imbalance definition: full scan, no early exit."""
    if v.value(A) < v.value(B):
        A, B = B, A
    best = None
    items_a = bits(A)
    items_b = bits(B)
    for sa in range(len(items_a) + 1):
        for S in itertools.combinations(items_a, sa):
            Sm = mask_of(S)
            for sb in range(len(items_b) + 1):
                for Sp in itertools.combinations(items_b, sb):
                    Spm = mask_of(Sp)
                    if v.value((A ^ Sm) | Spm) <= v.value((B ^ Spm) | Sm):
                        if best is None or sa + sb < best:
                            best = sa + sb
    return best


def disc_bruteforce(V, k, coloring):
    """Discrepancy of a coloring straight from the definition."""
    coloring = np.asarray(coloring)
    worst = 0.0
    for i, v in enumerate(V):
        vals = [v.value(mask_of(np.flatnonzero(coloring == l))) for l in range(k)]
        for a in range(k):
            for b in range(k):
                worst = max(worst, abs(vals[a] - vals[b]))
    return worst


def best_assignment_bruteforce(C):
    """Maximum-welfare assignment by enumerating all permutations."""
    n = C.shape[0]
    best = None
    best_sigma = None
    for sigma in itertools.permutations(range(n)):
        w = sum(C[i, sigma[i]] for i in range(n))
        if best is None or w > best + 1e-15:
            best, best_sigma = w, sigma
    return best, best_sigma


def max_path_weight_bruteforce(w, start):
    """Maximum simple-path weight from a vertex, empty path allowed."""
    n = w.shape[0]
    best = 0.0

    def walk(node, visited, acc):
        nonlocal best
        best = max(best, acc)
        for nxt in range(n):
            if nxt not in visited:
                walk(nxt, visited | {nxt}, acc + w[node, nxt])

    walk(start, {start}, 0.0)
    return best


def has_positive_cycle_bruteforce(w, tol=1e-9):
    """Positive-cycle test by enumerating all simple cycles."""
    n = w.shape[0]
    for size in range(2, n + 1):
        for nodes in itertools.permutations(range(n), size):
            if nodes[0] != min(nodes):
                continue  # canonical rotation only
            weight = sum(w[nodes[i], nodes[(i + 1) % size]] for i in range(size))
            if weight > tol:
                return True
    return False


def envy_freeable_lp(V, bundles, tol=1e-9):
    """Feasibility of envy-eliminating payments via linear programming."""
    from scipy.optimize import linprog

    n = len(V)
    vals = np.array([[v.value(b) for b in bundles] for v in V])
    A_ub = []
    b_ub = []
    for i in range(n):
        for j in range(n):
            if i == j:
                continue
            # v_i(A_i) + p_i >= v_i(A_j) + p_j   <=>   p_j - p_i <= v_i(A_i) - v_i(A_j)
            row = np.zeros(n)
            row[j] = 1.0
            row[i] = -1.0
            A_ub.append(row)
            b_ub.append(vals[i, i] - vals[i, j] + tol)
    res = linprog(c=np.zeros(n), A_ub=np.array(A_ub), b_ub=np.array(b_ub),
                  bounds=[(0, None)] * n, method="highs")
    return res.status == 0


def random_table_oracle(rng, m, lipschitz=True):
    """Small random table valuation, optionally rescaled to unit marginals."""
    from fairdisc.valuations import TableValuation, _table_max_marginal

    table = rng.standard_normal(1 << m)
    if lipschitz:
        table = table / _table_max_marginal(table, m)
    return TableValuation(table)
