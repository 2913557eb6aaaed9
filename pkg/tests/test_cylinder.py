from fractions import Fraction as F
from itertools import product

import pytest
from hypothesis import given
from hypothesis import strategies as st

from finitary_oe.cylinder import (
    ClopenSet,
    CylinderError,
    DepthExceeded,
    ExactPackingUnavailable,
    LevelSpec,
    Measure,
    TargetSumMismatch,
    canonicalize,
    measure_of,
    partition_approx,
    partition_exact,
    prefix_distance_depth,
)

BIN = LevelSpec((), (2,), 16)
MIXED = LevelSpec((3,), (2, 3), 16)
D = 5  # oracle resolution


def points(a: ClopenSet, d=D):
    """Oracle: the set of depth-d words inside ``a``."""
    return {w for w in a.levels.words(d) if any(w[: len(u)] == u for u in a.words)}


def word_sets(levels, max_len=4):
    def word(n):
        return st.tuples(*[st.integers(0, levels.size(j) - 1) for j in range(n)])

    return st.sets(st.integers(0, max_len).flatmap(word), max_size=6)


def product_measure(levels, w, weights):
    q = F(1)
    for j, c in enumerate(w):
        q *= weights(j)[c]
    return q


# -- level specs --------------------------------------------------------------------


def test_levelspec_rejects_atomic_block():
    with pytest.raises(CylinderError):
        LevelSpec((), (1,), 8)
    with pytest.raises(CylinderError):
        LevelSpec((2, 2), (2,), 2)


def test_levelspec_cycles_block_after_prefix():
    assert MIXED.sizes(6) == (3, 2, 3, 2, 3, 2)
    assert MIXED.radix(3) == 18


def test_word_index_roundtrip():
    for i in range(MIXED.radix(4)):
        assert MIXED.index(MIXED.word(i, 4)) == i


def test_check_word_bounds():
    with pytest.raises(CylinderError):
        BIN.check_word((0, 2))
    with pytest.raises(DepthExceeded):
        BIN.check_word((0,) * 17)


def test_shifted_levels_rotate_the_block():
    lv = MIXED.shifted(2)
    assert lv.sizes(4) == MIXED.sizes(6)[2:]


# -- canonical form -----------------------------------------------------------------


def test_sibling_merge():
    assert ClopenSet.of(BIN, (0, 0), (0, 1)).words == {(0,)}


def test_prefix_absorption():
    assert ClopenSet.of(BIN, (0,), (0, 1)).words == {(0,)}


def test_empty():
    assert canonicalize(BIN, []) == frozenset()
    assert not ClopenSet.empty(BIN)


def test_full_space_merges_to_root():
    assert ClopenSet.of(BIN, (0,), (1,)) == ClopenSet.full(BIN)


@given(word_sets(MIXED))
def test_canonical_form_is_antichain_and_merged(ws):
    a = ClopenSet(MIXED, frozenset(ws))
    words = list(a.words)
    for u in words:
        for v in words:
            assert u == v or v[: len(u)] != u
    for u in words:
        if u:
            sibs = {u[:-1] + (c,) for c in range(MIXED.size(len(u) - 1))}
            assert not sibs <= a.words


@given(word_sets(MIXED), word_sets(MIXED))
def test_canonical_form_unique(x, y):
    a, b = ClopenSet(MIXED, frozenset(x)), ClopenSet(MIXED, frozenset(y))
    assert (a.words == b.words) == (points(a) == points(b))


# -- boolean operations --------------------------------------------------------------


def test_boolean_examples():
    assert ClopenSet.of(BIN, (0,)).complement().words == {(1,)}
    assert ClopenSet.of(BIN, (0,)).intersection(ClopenSet.of(BIN, (0, 1))).words == {(0, 1)}
    assert ClopenSet.of(BIN, (0,)).refine_to_depth(2) == [(0, 0), (0, 1)]


@given(word_sets(MIXED), word_sets(MIXED))
def test_boolean_ops_match_point_sets(x, y):
    a, b = ClopenSet(MIXED, frozenset(x)), ClopenSet(MIXED, frozenset(y))
    pa, pb = points(a), points(b)
    assert points(a.union(b)) == pa | pb
    assert points(a.intersection(b)) == pa & pb
    assert points(a.difference(b)) == pa - pb
    assert points(a.complement()) == set(MIXED.words(D)) - pa
    assert a.is_subset(b) == (pa <= pb)
    assert a.is_disjoint(b) == (not pa & pb)


@given(word_sets(MIXED))
def test_double_complement(x):
    a = ClopenSet(MIXED, frozenset(x))
    assert a.complement().complement() == a


# -- measures -----------------------------------------------------------------------


def test_measure_examples():
    m = Measure.product(BIN, (), ((F(2, 3), F(1, 3)),))
    assert m.cylinder((0, 1)) == F(2, 9)
    assert measure_of(ClopenSet.full(BIN), m) == 1
    assert measure_of(ClopenSet.of(BIN, (0,), (1, 0)), m) == F(8, 9)


def test_measure_rejects_zero_block_weight():
    with pytest.raises(CylinderError):
        Measure.product(BIN, (), ((F(1), F(0)),))


def test_measure_rejects_bad_total():
    with pytest.raises(CylinderError):
        Measure.product(BIN, (), ((F(1, 2), F(1, 3)),))


WEIGHTS = ((F(1, 2), F(1, 3), F(1, 6)),), ((F(3, 5), F(2, 5)), (F(1, 7), F(2, 7), F(4, 7)))


@given(word_sets(MIXED))
def test_measure_is_additive_over_points(x):
    m = Measure.product(MIXED, *WEIGHTS)
    a = ClopenSet(MIXED, frozenset(x))
    oracle = sum((product_measure(MIXED, w, m.level_weights) for w in points(a)), F(0))
    assert m.measure_of(a) == oracle


def test_density_scales_cylinders():
    m = Measure.product(BIN, (), ((F(1, 2), F(1, 2)),), {(0,): F(3, 2), (1,): F(1, 2)})
    assert m.cylinder((0, 1)) == F(3, 8)
    assert sum(m.cylinder_measures(3)) == 1


def test_prefix_distance_depth():
    assert prefix_distance_depth(F(1, 4)) == 3
    assert prefix_distance_depth(F(1, 3)) == 2


# -- packing ------------------------------------------------------------------------


def test_partition_exact_uniform():
    m = Measure.uniform(BIN)
    parts = partition_exact(ClopenSet.full(BIN), [F(1, 2), F(1, 4), F(1, 4)], m)
    assert [p.words for p in parts] == [{(0,)}, {(1, 0)}, {(1, 1)}]


def test_partition_exact_binary_two_thirds():
    m = Measure.product(BIN, (), ((F(2, 3), F(1, 3)),))
    targets = [F(1, 3), F(2, 9), F(4, 9)]
    parts = partition_exact(ClopenSet.full(BIN), targets, m)
    assert [m.measure_of(p) for p in parts] == targets
    assert max(p.depth for p in parts) <= 3
    for i, p in enumerate(parts):
        for q in parts[i + 1:]:
            assert p.is_disjoint(q)


def test_partition_exact_non_dyadic_unavailable():
    with pytest.raises(ExactPackingUnavailable):
        partition_exact(ClopenSet.full(BIN), [F(1, 3), F(2, 3)], Measure.uniform(BIN))


def test_partition_exact_sum_mismatch():
    with pytest.raises(TargetSumMismatch):
        partition_exact(ClopenSet.full(BIN), [F(1, 2)], Measure.uniform(BIN))


def test_partition_approx_non_dyadic():
    m = Measure.uniform(BIN)
    parts, defect = partition_approx(ClopenSet.full(BIN), [F(1, 3), F(2, 3)], m, F(1, 64))
    for p, t in zip(parts, [F(1, 3), F(2, 3)]):
        assert abs(m.measure_of(p) - t) <= F(1, 64)
    assert m.measure_of(defect) <= F(1, 32)
    union = parts[0].union(parts[1]).union(defect)
    assert union == ClopenSet.full(BIN)


def test_partition_approx_exact_case_matches_exact():
    m = Measure.uniform(BIN)
    targets = [F(1, 2), F(1, 4), F(1, 4)]
    parts, defect = partition_approx(ClopenSet.full(BIN), targets, m, F(1, 8))
    assert parts == partition_exact(ClopenSet.full(BIN), targets, m)
    assert not defect


def test_partition_approx_half_zero_tol():
    m = Measure.uniform(BIN)
    parts, defect = partition_approx(ClopenSet.full(BIN), [F(1, 2)], m, F(0))
    assert parts[0].words == {(0,)}
    assert defect.words == {(1,)}


@given(st.lists(st.integers(1, 20), min_size=1, max_size=4), st.integers(0, 3))
def test_partition_approx_invariants(raw, k):
    m = Measure.product(MIXED, *WEIGHTS)
    total = sum(raw)
    targets = [F(r, total) * F(9, 10) for r in raw]
    tol = F(1, 2 ** (k + 3))
    parts, defect = partition_approx(ClopenSet.full(MIXED), targets, m, tol)
    covered = defect
    for p, t in zip(parts, targets):
        assert abs(m.measure_of(p) - t) <= tol
        assert covered.is_disjoint(p)
        covered = covered.union(p)
    assert covered == ClopenSet.full(MIXED)


@pytest.mark.parametrize("sizes", [(2,), (3,), (2, 3)])
def test_words_enumeration_complete(sizes):
    lv = LevelSpec((), sizes, 8)
    assert lv.words(3) == [tuple(reversed(t)) for t in product(*[range(s) for s in reversed(lv.sizes(3))])]
