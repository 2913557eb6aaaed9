from fractions import Fraction as F

import pytest
from hypothesis import given
from hypothesis import strategies as st

from finitary_oe.config import ConfigError, dump_map, dump_system, format_word, load_map, load_system, parse_word
from finitary_oe.odometer import GroupoidMap, OdometerSystem

BINARY = """\
# binary
depth_max 40
block 2
bweight 0 2/3 1/3
"""


def test_load_binary():
    sys = load_system(BINARY)
    assert sys.levels.block == (2,) and sys.levels.depth_max == 40
    assert sys.measure.cylinder((0, 1)) == F(2, 9)


def test_zero_denominator_reports_line():
    with pytest.raises(ConfigError) as e:
        load_system("block 2\nbweight 0 2/0 1/3\n")
    assert e.value.line == 2 and "line 2" in str(e.value)


@pytest.mark.parametrize(
    "text, line",
    [
        ("block 2\nbweight 0 0.5 0.5\n", 2),
        ("block 2\nfrobnicate 3\n", 2),
        ("bweight 0 1/2 1/2\n", 2),
        ("block 2\nbweight 0 1/2 1/2\nbweight 0 1/2 1/2\n", 3),
        ("block x\n", 1),
    ],
)
def test_errors_carry_line(text, line):
    with pytest.raises(ConfigError) as e:
        load_system(text)
    assert e.value.line == line


def test_missing_weights():
    with pytest.raises(ConfigError):
        load_system("block 2 2\nbweight 0 1/2 1/2\n")


def test_words():
    assert parse_word("-") == () and parse_word("1.0.2") == (1, 0, 2)
    assert format_word(()) == "-" and format_word((1, 0)) == "1.0"


def weights(n):
    return st.lists(st.integers(1, 9), min_size=n, max_size=n).map(lambda xs: tuple(F(x, sum(xs)) for x in xs))


@st.composite
def systems(draw):
    block = draw(st.lists(st.integers(2, 3), min_size=1, max_size=2))
    prefix = draw(st.lists(st.integers(2, 3), max_size=2))
    bw = [draw(weights(s)) for s in block]
    pw = [draw(weights(s)) for s in prefix]
    return OdometerSystem.from_weights(bw, pw, depth_max=draw(st.integers(len(block) + len(prefix), 30)))


@given(systems())
def test_system_roundtrip(sys):
    text = dump_system(sys)
    back = load_system(text)
    assert dump_system(back) == text
    assert back.measure.cylinder_measures(3) == sys.measure.cylinder_measures(3)


def test_density_roundtrip():
    text = BINARY + "density 0 9/8\ndensity 1 3/4\n"
    sys = load_system(text)
    assert sys.measure.cylinder((0,)) == F(3, 4)
    assert dump_system(load_system(dump_system(sys))) == dump_system(sys)


def test_map_roundtrip():
    lv = load_system(BINARY).levels
    g = GroupoidMap.build(lv, [((0, 0), 1), ((1, 0), 2)])
    back = load_map(dump_map(g))
    assert back.pieces == g.pieces and back.domain == g.domain and back.range == g.range


def test_map_bad_piece_line():
    with pytest.raises(ConfigError) as e:
        load_map("levels - | 2 | 8\npiece 0.0\n")
    assert e.value.line == 2
