import random
from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import binary, brute_measure, ternary, uniform
from finitary_oe.cylinder import ClopenSet, CylinderError
from finitary_oe.odometer import (
    OVERFLOW,
    CarryEscape,
    GroupoidMap,
    identity_map,
    induced_map,
    kac_audit,
    mp_return_map,
    odometer_map,
    rn_derivative,
    rokhlin_tower,
    shift,
    successor,
)


def index_shift(lv, w, n):
    """Oracle: shift by integer addition on the mixed-radix index."""
    i = lv.index(w) + n
    return lv.word(i, len(w)) if 0 <= i < lv.radix(len(w)) else None


# -- successor / shift ---------------------------------------------------------------


def test_successor_examples():
    lv = binary().levels
    assert successor((1, 1, 0), lv) == (0, 0, 1)
    assert successor((0, 1, 1), lv) == (1, 1, 1)
    assert successor((1, 1), lv) is OVERFLOW


@given(st.lists(st.integers(0, 1), min_size=1, max_size=12), st.integers(-3000, 3000))
def test_shift_matches_index_arithmetic(w, n):
    lv = binary().levels
    assert shift(lv, tuple(w), n) == index_shift(lv, tuple(w), n)


@given(st.lists(st.integers(0, 2), min_size=1, max_size=8), st.integers(-500, 500))
def test_shift_inverse(w, n):
    lv = ternary().levels
    v = shift(lv, tuple(w), n)
    if v is not None:
        assert shift(lv, v, -n) == tuple(w)


# -- cocycle -------------------------------------------------------------------------


def test_rn_examples():
    sys = binary()
    assert rn_derivative(sys, (0,), 1).ratio == F(1, 2)
    assert rn_derivative(sys, (1, 1, 0), 1).ratio == 2
    assert rn_derivative(sys, (1, 0, 1), 0).ratio == 1


def test_rn_refines_on_carry():
    cv = rn_derivative(binary(), (1,), 1)
    assert cv.word == (1, 0) and cv.image == (0, 1)
    assert cv.ratio == 1


@given(st.lists(st.integers(0, 1), min_size=0, max_size=14), st.integers(-200, 200))
def test_rn_matches_product_oracle(w, n):
    sys = binary()
    cv = rn_derivative(sys, tuple(w), n)
    assert cv.word[: len(w)] == tuple(w)
    assert cv.image == index_shift(sys.levels, cv.word, n)
    assert cv.ratio == brute_measure(sys, cv.image) / brute_measure(sys, cv.word)


def cocycle_triple(sys, w, m, n):
    """Values of m, n and m+n on one common cylinder (refined as needed)."""
    z = tuple(w)
    while True:
        a = rn_derivative(sys, z, m)
        z = a.word
        b = rn_derivative(sys, a.image, n)
        z = z + b.word[len(a.image):]
        a = rn_derivative(sys, z, m)
        if a.word == z and rn_derivative(sys, a.image, n).word == a.image:
            break
    b = rn_derivative(sys, a.image, n)
    c = rn_derivative(sys, z, m + n)
    return a, b, c


@given(st.lists(st.integers(0, 1), min_size=1, max_size=16), st.integers(-300, 300), st.integers(-300, 300))
def test_cocycle_identity_property(w, m, n):
    a, b, c = cocycle_triple(binary(), w, m, n)
    assert c.word == a.word
    assert c.ratio == a.ratio * b.ratio


def test_cocycle_identity_seeded_suite():
    rng = random.Random(20240611)
    sys = binary()
    for _ in range(1000):
        w = tuple(rng.randrange(2) for _ in range(rng.randint(1, 16)))
        a, b, c = cocycle_triple(sys, w, rng.randint(-1000, 1000), rng.randint(-1000, 1000))
        assert c.ratio == a.ratio * b.ratio


# -- groupoid maps -------------------------------------------------------------------


def test_invert_single_piece():
    lv = uniform().levels
    g = GroupoidMap.build(lv, [((0,), 1)])
    assert g.invert().pieces == (((1,), -1),)


def test_compose_identity():
    lv = uniform().levels
    g = GroupoidMap.build(lv, [((0, 0), 1), ((1, 0), 2)])
    assert g.compose(identity_map(g.domain)).equivalent(g)
    assert identity_map(g.range).compose(g).equivalent(g)


def test_image_of_cylinder():
    lv = uniform().levels
    g = GroupoidMap.build(lv, [((0,), 1)])
    assert g.image(ClopenSet.of(lv, (0,))).words == {(1,)}


def test_overlapping_pieces_rejected():
    lv = uniform().levels
    with pytest.raises(CylinderError):
        GroupoidMap.build(lv, [((0,), 1), ((0, 1), 2)])


def test_carry_out_piece_rejected():
    with pytest.raises(CarryEscape):
        GroupoidMap.build(uniform().levels, [((1, 0), 3)])


def random_map(rng, lv, d=4):
    words = lv.words(d)
    src = rng.sample(words, rng.randint(1, 6))
    dst = rng.sample(words, len(src))
    return GroupoidMap.build(lv, [(u, lv.index(v) - lv.index(u)) for u, v in zip(src, dst)])


@given(st.integers(0, 10**6))
def test_compose_with_inverse_is_identity(seed):
    lv = ternary().levels
    g = random_map(random.Random(seed), lv)
    h = g.invert().compose(g)
    assert all(k == 0 for _, k in h.pieces)
    assert h.covered == g.covered


@given(st.integers(0, 10**6))
def test_compose_is_pointwise(seed):
    rng = random.Random(seed)
    lv = binary().levels
    f, g = random_map(rng, lv), random_map(rng, lv)
    h = g.compose(f)
    for w in lv.words(4):
        x = f.apply(w)
        want = g.apply(x) if x is not None and len(x) == 4 else None
        got = h.apply(w)
        if want is not None:
            assert got == want


# -- induced maps --------------------------------------------------------------------


def test_induced_on_full_space_is_T():
    sys = uniform(depth_max=8)
    g = induced_map(sys, sys.space)
    assert {k for _, k in g.pieces} == {1}


def test_induced_on_zero_cylinder_matches_orbit_enumeration():
    sys = uniform(depth_max=12)
    lv = sys.levels
    a = ClopenSet.of(lv, (0,))
    g = induced_map(sys, a)
    for w in lv.words(8):
        if w[0] != 0 or w == (0,) + (1,) * 7:
            continue
        k, v = 1, shift(lv, w, 1)
        while v[0] != 0:
            k, v = k + 1, shift(lv, w, k + 1)
        assert g.power_at(w) == k == 2


def test_kac_identity_half_measure_set():
    sys = uniform(depth_max=12)
    a = ClopenSet.of(sys.levels, (0, 0), (1, 1))
    audit = kac_audit(sys, induced_map(sys, a))
    assert audit["identity_holds"]
    assert audit["weighted_return_sum"] == audit["tower_mass"]
    assert audit["weighted_return_sum"] + audit["uncovered_measure"] == 1


@given(st.sets(st.tuples(st.integers(0, 1), st.integers(0, 1), st.integers(0, 1)), min_size=1))
def test_kac_identity_property(ws):
    sys = binary(depth_max=12)
    assert kac_audit(sys, induced_map(sys, ClopenSet(sys.levels, frozenset(ws))))["identity_holds"]


# -- Rokhlin towers ------------------------------------------------------------------


def test_tower_binary_n5():
    t = rokhlin_tower(binary(), 5, F(1, 100))
    assert t.base.words == {(0, 0, 0)} and t.height == 8
    assert not t.residual and t.is_disjoint()
    union = ClopenSet.empty(t.base.levels)
    for lvl in t.levels:
        union = union | lvl
    assert union == ClopenSet.full(t.base.levels)


def test_tower_n1():
    t = rokhlin_tower(binary(), 1, F(1, 2))
    assert t.base.words == {(0,)} and t.height == 2 and not t.residual


def test_tower_for_induced_map():
    sys = uniform(depth_max=16)
    g = induced_map(sys, ClopenSet.of(sys.levels, (0,)))
    t = rokhlin_tower(g, 2, F(1, 8), sys=sys)
    assert sys.measure.measure_of(t.residual) <= F(1, 8)
    assert t.is_disjoint()
    for lo, hi in zip(t.levels, t.levels[1:]):
        assert g.image(lo) == hi


# -- measure-preserving return map -----------------------------------------------------


def test_mp_return_map_ternary_has_unit_cocycle():
    sys = ternary(depth_max=14)
    r = mp_return_map(sys)
    assert r.pieces
    for w, k in r.pieces:
        assert brute_measure(sys, shift(sys.levels, w, k)) == brute_measure(sys, w)


def test_mp_return_map_uniform_is_T():
    r = mp_return_map(uniform(depth_max=10))
    assert {k for _, k in r.pieces} == {1}


def test_mp_return_map_binary_is_first_return():
    sys = binary(depth_max=16)
    lv = sys.levels
    for w, k in mp_return_map(sys).pieces:
        assert k > 0
        base = brute_measure(sys, w)
        assert brute_measure(sys, shift(lv, w, k)) == base
        for j in range(1, k):
            assert brute_measure(sys, shift(lv, w, j)) != base


def test_odometer_map_covers_all_but_max_word():
    sys = binary(depth_max=6)
    g = odometer_map(sys)
    assert sys.measure.measure_of(g.defect) == F(1, 3) ** 6
