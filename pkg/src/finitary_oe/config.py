"""Line-oriented text format for odometer systems and groupoid maps.

System grammar (one directive per line, ``#`` starts a comment)::

    depth_max 24
    prefix 3            # alphabet sizes of the non-repeating levels
    block 2 2           # alphabet sizes of the repeating block
    pweight 0 1/2 1/4 1/4
    bweight 0 2/3 1/3   # weights of block position 0
    bweight 1 3/4 1/4
    density 0.1 4/5     # word "0.1" (letters joined by '.'), '-' is the empty word

Map grammar::

    levels <prefix sizes> | <block sizes> | <depth_max>
    domain <word> <word> ...
    range <word> ...
    piece <word> <power>

Rationals are ``p/q`` or integers; decimals and zero denominators are rejected.
``dump_system(load_system(text))`` is the canonical form and is stable.
"""

from __future__ import annotations

from fractions import Fraction

from finitary_oe.cylinder import ClopenSet, CylinderError, LevelSpec, Measure
from finitary_oe.exact import RationalParseError, fmt, parse_rational
from finitary_oe.odometer import GroupoidMap, OdometerSystem

__all__ = ["ConfigError", "load_system", "dump_system", "load_map", "dump_map", "parse_word", "format_word"]


class ConfigError(ValueError):
    def __init__(self, line: int, msg: str):
        super().__init__(f"line {line}: {msg}")
        self.line = line


def parse_word(tok: str) -> tuple:
    if tok == "-":
        return ()
    try:
        return tuple(int(c) for c in tok.split("."))
    except ValueError:
        raise ValueError(f"bad word {tok!r}") from None


def format_word(w) -> str:
    return ".".join(str(c) for c in w) if w else "-"


def _lines(text: str):
    for n, raw in enumerate(text.splitlines(), start=1):
        line = raw.split("#", 1)[0].strip()
        if line:
            yield n, line.split()


def _ints(n, toks):
    try:
        return tuple(int(t) for t in toks)
    except ValueError:
        raise ConfigError(n, f"expected integers, got {' '.join(toks)!r}") from None


def _rats(n, toks):
    try:
        return tuple(parse_rational(t) for t in toks)
    except RationalParseError as e:
        raise ConfigError(n, str(e)) from None


def load_system(text: str) -> OdometerSystem:
    depth_max = 32
    prefix = block = None
    pw: dict = {}
    bw: dict = {}
    density: dict = {}
    last = 0
    for n, toks in _lines(text):
        last = n
        key, args = toks[0], toks[1:]
        if key == "depth_max":
            if len(args) != 1:
                raise ConfigError(n, "depth_max takes one integer")
            (depth_max,) = _ints(n, args)
        elif key == "prefix":
            prefix = _ints(n, args)
        elif key == "block":
            block = _ints(n, args)
        elif key in ("pweight", "bweight"):
            if len(args) < 2:
                raise ConfigError(n, f"{key} needs a position and weights")
            (j,) = _ints(n, args[:1])
            table = pw if key == "pweight" else bw
            if j in table:
                raise ConfigError(n, f"duplicate {key} {j}")
            table[j] = _rats(n, args[1:])
        elif key == "density":
            if len(args) != 2:
                raise ConfigError(n, "density takes a word and a value")
            try:
                w = parse_word(args[0])
            except ValueError as e:
                raise ConfigError(n, str(e)) from None
            (v,) = _rats(n, args[1:])
            density[w] = v
        else:
            raise ConfigError(n, f"unknown directive {key!r}")
    if block is None:
        raise ConfigError(last + 1, "missing 'block' line")
    prefix = prefix or ()
    if sorted(pw) != list(range(len(prefix))):
        raise ConfigError(last + 1, f"need pweight lines for positions 0..{len(prefix) - 1}")
    if sorted(bw) != list(range(len(block))):
        raise ConfigError(last + 1, f"need bweight lines for positions 0..{len(block) - 1}")
    try:
        levels = LevelSpec(prefix, block, depth_max)
        m = Measure(levels, tuple(pw[j] for j in range(len(prefix))), tuple(bw[j] for j in range(len(block))), density)
    except CylinderError as e:
        raise ConfigError(last, str(e)) from None
    return OdometerSystem(levels, m)


def dump_system(sys: OdometerSystem) -> str:
    lv, m = sys.levels, sys.measure
    out = [f"depth_max {lv.depth_max}"]
    if lv.prefix:
        out.append("prefix " + " ".join(map(str, lv.prefix)))
    out.append("block " + " ".join(map(str, lv.block)))
    for j, ws in enumerate(m.prefix_weights):
        out.append(f"pweight {j} " + " ".join(fmt(x) for x in ws))
    for j, ws in enumerate(m.block_weights):
        out.append(f"bweight {j} " + " ".join(fmt(x) for x in ws))
    for w, v in m.density:
        out.append(f"density {format_word(w)} {fmt(v)}")
    return "\n".join(out) + "\n"


def _levels_line(lv: LevelSpec) -> str:
    return f"levels {' '.join(map(str, lv.prefix)) or '-'} | {' '.join(map(str, lv.block))} | {lv.depth_max}"


def dump_map(g: GroupoidMap) -> str:
    out = [_levels_line(g.levels)]
    out.append("domain " + " ".join(format_word(w) for w in g.domain.sorted()))
    out.append("range " + " ".join(format_word(w) for w in g.range.sorted()))
    out.extend(f"piece {format_word(w)} {k}" for w, k in g.pieces)
    return "\n".join(out) + "\n"


def load_map(text: str, levels: LevelSpec | None = None) -> GroupoidMap:
    lv = levels
    dom = rng = None
    pieces = []
    for n, toks in _lines(text):
        key, args = toks[0], toks[1:]
        try:
            if key == "levels":
                parts = " ".join(args).split("|")
                if len(parts) != 3:
                    raise ConfigError(n, "levels: <prefix> | <block> | <depth_max>")
                pre = parts[0].split()
                pre = () if pre == ["-"] else _ints(n, pre)
                lv = LevelSpec(pre, _ints(n, parts[1].split()), _ints(n, parts[2].split())[0])
            elif key in ("domain", "range"):
                if lv is None:
                    raise ConfigError(n, "levels must come first")
                s = ClopenSet(lv, [parse_word(t) for t in args])
                if key == "domain":
                    dom = s
                else:
                    rng = s
            elif key == "piece":
                if len(args) != 2:
                    raise ConfigError(n, "piece takes a word and a power")
                pieces.append((parse_word(args[0]), _ints(n, args[1:])[0]))
            else:
                raise ConfigError(n, f"unknown directive {key!r}")
        except (CylinderError, ValueError) as e:
            if isinstance(e, ConfigError):
                raise
            raise ConfigError(n, str(e)) from None
    if lv is None:
        raise ConfigError(1, "missing 'levels' line")
    try:
        return GroupoidMap.build(lv, pieces, dom, rng)
    except CylinderError as e:
        raise ConfigError(0, str(e)) from None


def system_from_spec(block_weights, prefix_weights=(), depth_max=32) -> OdometerSystem:
    """Convenience wrapper accepting strings such as ``"2/3"``."""
    conv = lambda ws: tuple(tuple(Fraction(x) for x in w) for w in ws)  # noqa: E731
    return OdometerSystem.from_weights(conv(block_weights), conv(prefix_weights), depth_max)
