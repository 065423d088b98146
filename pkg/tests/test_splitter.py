import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fairdisc import (
    AdditiveValuation,
    CutVector,
    NecklaceLayout,
    SearchConfig,
    eval_exact,
    max_intervals_per_color,
    random_instance,
    split_additive_exact,
    split_necklace,
)
from fairdisc.errors import CapacityError
from fairdisc.splitter import check_fractional_coloring, cuts_to_coloring, fractional_counts


def test_cuts_to_coloring_whole_necklace_one_color():
    layout = NecklaceLayout.identity(2)
    cv = CutVector((), (0,), k=2)
    chi = cuts_to_coloring(layout, cv)
    assert np.allclose(chi, [[1, 0], [1, 0]])


def test_cuts_to_coloring_cut_at_item_boundary():
    layout = NecklaceLayout.identity(2)
    cv = CutVector((0.5,), (0, 1), k=2)
    chi = cuts_to_coloring(layout, cv)
    assert np.allclose(chi, [[1, 0], [0, 1]])


def test_cuts_to_coloring_cut_inside_item():
    # item 0 occupies [0, 0.5]; a cut at 0.25 splits it in half
    layout = NecklaceLayout.identity(2)
    cv = CutVector((0.25,), (0, 1), k=2)
    chi = cuts_to_coloring(layout, cv)
    assert np.allclose(chi, [[0.5, 0.5], [0.0, 1.0]])


def test_cuts_to_coloring_respects_layout_order():
    layout = NecklaceLayout((1, 0))
    cv = CutVector((0.5,), (0, 1), k=2)
    chi = cuts_to_coloring(layout, cv)
    assert np.allclose(chi, [[0, 1], [1, 0]])


def test_cut_vector_validation():
    with pytest.raises(ValueError):
        CutVector((0.6, 0.4), (0, 1, 0), k=2)  # unsorted
    with pytest.raises(ValueError):
        CutVector((0.5,), (0,), k=2)  # wrong label count
    with pytest.raises(ValueError):
        CutVector((0.5,), (0, 2), k=2)  # color out of range
    with pytest.raises(ValueError):
        CutVector((1.5,), (0, 1), k=2)  # cut outside [0,1]


def test_interval_counts_merge_and_degenerate():
    cv = CutVector((0.3, 0.3, 0.8), (0, 1, 0, 0), k=2)
    # middle piece is zero-length, so color 0 forms one interval [0,0.3]+[0.3,0.8]...
    counts = cv.interval_counts()
    assert counts[1] == 0  # degenerate piece carries no measure
    assert counts[0] == 1  # adjacent same-color pieces merge


def test_interval_counts_alternating():
    cv = CutVector((0.2, 0.7), (0, 1, 0), k=2)
    assert list(cv.interval_counts()) == [2, 1]


@settings(max_examples=60, deadline=None)
@given(
    st.integers(1, 6),
    st.integers(2, 4),
    st.lists(st.floats(0.0, 1.0), min_size=0, max_size=6),
    st.integers(0, 2**31 - 1),
)
def test_cuts_to_coloring_produces_valid_coloring(m, k, cuts, seed):
    rng = np.random.default_rng(seed)
    cuts = tuple(sorted(cuts))
    labels = tuple(int(c) for c in rng.integers(0, k, len(cuts) + 1))
    chi = cuts_to_coloring(NecklaceLayout.identity(m), CutVector(cuts, labels, k))
    check_fractional_coloring(chi, k)  # raises on violation
    assert np.max(np.abs(chi.sum(axis=1) - 1.0)) < 1e-12


def test_split_necklace_symmetric_instance():
    V = [AdditiveValuation([1.0, 1.0, 1.0, 1.0])]
    rep = split_necklace(V, 2, config=SearchConfig(seed=0))
    assert rep.converged
    assert rep.imbalance <= 1e-9


def test_split_necklace_three_colors_three_items():
    V = [AdditiveValuation([1.0, 1.0, 1.0])]
    rep = split_necklace(V, 3, config=SearchConfig(seed=0))
    assert rep.converged
    assert rep.imbalance <= 1e-9
    # the only zero-imbalance split puts one item per color
    assert sorted(np.argmax(rep.coloring, axis=1).tolist()) == [0, 1, 2]


def test_split_necklace_cross_checks_additive_exact():
    V = random_instance("additive-signed", 2, 10, seed=11)
    rep = split_necklace(V, 2, config=SearchConfig(seed=11, tol=1e-6))
    assert rep.converged
    assert rep.imbalance <= 1e-6
    exact = split_additive_exact(V, 2)
    assert exact.imbalance <= 1e-9


def test_split_necklace_structural_invariants():
    for seed, (n, k) in enumerate([(1, 2), (2, 2), (2, 3), (3, 2)]):
        V = random_instance("coverage", n, 12, seed=seed)
        rep = split_necklace(V, k, config=SearchConfig(seed=seed, restarts=8))
        cap = max_intervals_per_color(n, k)
        assert len(rep.cut_vector.cuts) <= n * (k - 1)
        counts = rep.cut_vector.interval_counts()
        assert (counts <= cap).all()
        per_color = fractional_counts(rep.coloring)
        assert (per_color <= 2 * counts).all()
        assert rep.max_fractional_per_color <= 2 * n


def test_split_necklace_monotone_incumbent():
    V = random_instance("coverage", 2, 10, seed=5)
    rep = split_necklace(V, 2, config=SearchConfig(seed=5, restarts=4, polish=False))
    for trace in rep.history:
        assert all(b <= a + 1e-15 for a, b in zip(trace, trace[1:]))


def test_split_necklace_deterministic():
    V = random_instance("coverage", 2, 10, seed=3)
    a = split_necklace(V, 2, config=SearchConfig(seed=3, restarts=4))
    b = split_necklace(V, 2, config=SearchConfig(seed=3, restarts=4))
    assert np.array_equal(a.coloring, b.coloring)
    assert a.imbalance == b.imbalance
    assert a.cut_vector.cuts == b.cut_vector.cuts


def test_split_necklace_capacity_guard():
    V = random_instance("additive-uniform", 13, 20, seed=0)
    with pytest.raises(CapacityError):
        split_necklace(V, 13)


def test_split_necklace_imbalance_measured_canonically():
    V = random_instance("coverage", 2, 10, seed=9)
    rep = split_necklace(V, 2, config=SearchConfig(seed=9, restarts=4))
    vals = np.array([[eval_exact(v, rep.coloring[:, l]) for l in range(2)] for v in V])
    assert rep.imbalance == pytest.approx(float(np.max(vals.max(1) - vals.min(1))), abs=1e-15)


def test_report_serialization_roundtrip(tmp_path):
    import json

    V = random_instance("coverage", 2, 8, seed=1)
    rep = split_necklace(V, 2, config=SearchConfig(seed=1, restarts=2))
    path = tmp_path / "split.json"
    rep.save(path)
    doc = json.loads(path.read_text())
    assert doc["k"] == 2
    assert np.allclose(doc["coloring"], rep.coloring)
    assert doc["cuts"] == list(rep.cut_vector.cuts)


def test_additive_exact_single_constraint():
    rep = split_additive_exact([AdditiveValuation([1.0, 1.0])], 2)
    assert rep.imbalance <= 1e-9
    assert rep.max_fractional_per_color <= 1


def test_additive_exact_integral_split_exists():
    V = [AdditiveValuation([3.0, 1.0, 1.0, 1.0])]
    # exhaustive 2^4 search confirms a perfectly equal integral split exists
    exists = any(
        abs(V[0].value(S) - V[0].value(~S & 0b1111)) < 1e-12 for S in range(16)
    )
    assert exists
    rep = split_additive_exact(V, 2)
    assert rep.imbalance <= 1e-9


def test_additive_exact_residuals_and_counts():
    V = random_instance("additive-signed", 2, 6, seed=21)
    rep = split_additive_exact(V, 3)
    W = np.stack([v.weights for v in V])
    vals = W @ rep.coloring
    for i in range(2):
        for a in range(3):
            for b in range(3):
                assert abs(vals[i, a] - vals[i, b]) <= 1e-9
    assert (fractional_counts(rep.coloring) <= 2 * (3 - 1)).all()
    # at most n(k-1) items fractional overall
    frac_items = int((fractional_counts(rep.coloring) > 0).any() and
                     ((rep.coloring > 0) & (rep.coloring < 1)).any(axis=1).sum())
    assert frac_items <= 2 * (3 - 1)


def test_additive_exact_rejects_non_additive():
    (v,) = random_instance("coverage", 1, 4, seed=0)
    with pytest.raises(ValueError):
        split_additive_exact([v], 2)


def test_layout_validation():
    with pytest.raises(ValueError):
        NecklaceLayout((0, 0, 1))
    layout = NecklaceLayout.identity(3)
    assert layout.m == 3
