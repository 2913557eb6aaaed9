"""Odometer dynamics, the Radon-Nikodym cocycle, and the topological full groupoid.

``T`` adds one to the first coordinate with carry to the right.  At depth
``L`` the depth-``L`` cylinders, read as little-endian mixed-radix numbers,
are permuted by ``T`` as ``i -> i + 1`` except for the all-maximal cylinder,
whose carry leaves the word.  Every element of the topological full
groupoid is therefore a finite list of ``(cylinder, power)`` pieces.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Sequence

from finitary_oe import kernels
from finitary_oe.cylinder import ClopenSet, CylinderError, LevelSpec, Measure, Word, has_prefix_pair

__all__ = [
    "OVERFLOW",
    "Overflow",
    "OdometerSystem",
    "CocycleValue",
    "GroupoidMap",
    "Tower",
    "CarryEscape",
    "ReturnTimeExceeded",
    "TowerSearchFailed",
    "NotSpecialMeasure",
    "successor",
    "shift",
    "rn_derivative",
    "odometer_map",
    "induced_map",
    "kac_audit",
    "rokhlin_tower",
    "mp_return_map",
    "identity_map",
]

DEFAULT_STEP_BOUND = 10_000


class Overflow:
    """The all-maximal word: its successor is not a cylinder at this depth."""

    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __repr__(self):
        return "OVERFLOW"


OVERFLOW = Overflow()


class CarryEscape(CylinderError):
    pass


class ReturnTimeExceeded(CylinderError):
    pass


class TowerSearchFailed(CylinderError):
    pass


class NotSpecialMeasure(CylinderError):
    pass


@dataclass(frozen=True)
class OdometerSystem:
    levels: LevelSpec
    measure: Measure

    @classmethod
    def from_weights(cls, block_weights, prefix_weights=(), depth_max=32, density=None) -> "OdometerSystem":
        levels = LevelSpec(tuple(len(w) for w in prefix_weights), tuple(len(w) for w in block_weights), depth_max)
        m = Measure.product(levels, prefix_weights, block_weights, density or ())
        return cls(levels, m)

    @property
    def space(self) -> ClopenSet:
        return ClopenSet.full(self.levels)

    def with_measure(self, measure: Measure) -> "OdometerSystem":
        return OdometerSystem(self.levels, measure)


def successor(w: Sequence[int], levels: LevelSpec):
    out = shift(levels, w, 1)
    return OVERFLOW if out is None else out


def shift(levels: LevelSpec, w: Sequence[int], n: int):
    """``T**n`` on the cylinder ``[w]`` as a word, or ``None`` if the carry leaves ``w``."""
    w = tuple(w)
    return kernels.shift_word(w, levels.sizes(len(w)), n)


@dataclass(frozen=True)
class CocycleValue:
    ratio: Fraction
    word: Word
    image: Word
    power: int


def rn_derivative(sys: OdometerSystem, w: Sequence[int], n: int) -> CocycleValue:
    """``d(mu o T**n)/d mu`` on ``[w]``, refining ``w`` until it is constant there.

    The refinement appends 0 (forward carry) or the maximal letter (backward
    borrow), which is the unique extension that absorbs the carry soonest.
    """
    levels = sys.levels
    w = tuple(w)
    dd = sys.measure.density_depth
    if len(w) < dd:
        w = w + (0,) * (dd - len(w))
    while True:
        c = kernels.carry_out(w, levels.sizes(len(w)), n)
        if c == 0:
            break
        if len(w) >= levels.depth_max:
            raise CarryEscape(f"T^{n} carry escapes depth_max on {w}")
        w = w + ((0,) if c > 0 else (levels.size(len(w)) - 1,))
    image = shift(levels, w, n)
    m = sys.measure
    return CocycleValue(m.cylinder(image) / m.cylinder(w), w, image, n)


# -- groupoid maps ------------------------------------------------------------------


def _index_words(words: Iterable[Word]) -> list:
    return sorted(words)


def _covering(sorted_words: list, wordset, w: Word):
    """Key in ``wordset`` that is a prefix of ``w`` (or ``None``)."""
    for k in range(len(w), -1, -1):
        if w[:k] in wordset:
            return w[:k]
    return None


def _extending(sorted_words: list, w: Word) -> list:
    """Keys in ``sorted_words`` that properly or trivially extend ``w``."""
    i = bisect.bisect_left(sorted_words, w)
    out = []
    n = len(w)
    while i < len(sorted_words) and sorted_words[i][:n] == w:
        out.append(sorted_words[i])
        i += 1
    return out


@dataclass(frozen=True)
class GroupoidMap:
    """Partial homeomorphism acting as ``T**power`` on each piece cylinder.

    ``domain`` and ``range`` are clopen; the part of the domain not covered
    by pieces is the (domain-side) ``defect`` and the part of the range not
    hit is ``range_defect``.
    """

    levels: LevelSpec
    pieces: tuple
    domain: ClopenSet
    range: ClopenSet
    _cache: dict = field(default_factory=dict, repr=False, compare=False, hash=False)

    def __post_init__(self):
        pieces = tuple(sorted((tuple(w), int(k)) for w, k in self.pieces))
        object.__setattr__(self, "pieces", pieces)
        words = [w for w, _ in pieces]
        wordset = set(words)
        if len(wordset) != len(words) or has_prefix_pair(words):
            raise CylinderError("piece cylinders overlap")
        images = []
        for w, k in pieces:
            im = shift(self.levels, w, k)
            if im is None:
                raise CarryEscape(f"piece ({w}, {k}) is not a cylinder translation")
            images.append(im)
        imset = set(images)
        if len(imset) != len(images) or has_prefix_pair(sorted(images)):
            raise CylinderError("piece images overlap")
        self._cache["words"] = words
        self._cache["wordset"] = wordset
        self._cache["power"] = dict(pieces)
        self._cache["images"] = images

    @classmethod
    def build(cls, levels: LevelSpec, pieces, domain=None, range=None) -> "GroupoidMap":
        pieces = list(pieces)
        covered = ClopenSet(levels, [w for w, _ in pieces])
        ims = [shift(levels, w, k) for w, k in pieces]
        if None in ims:
            w, k = pieces[ims.index(None)]
            raise CarryEscape(f"piece ({w}, {k}) is not a cylinder translation")
        imgs = ClopenSet(levels, ims)
        domain = covered if domain is None else domain
        range_ = imgs if range is None else range
        return cls(levels, tuple(pieces), domain, range_)

    def check_contained(self) -> None:
        if not self.covered.is_subset(self.domain):
            raise CylinderError("pieces leave the domain")
        if not self.image_set.is_subset(self.range):
            raise CylinderError("images leave the range")

    @property
    def covered(self) -> ClopenSet:
        if "covered" not in self._cache:
            self._cache["covered"] = ClopenSet(self.levels, self._cache["words"])
        return self._cache["covered"]

    @property
    def image_set(self) -> ClopenSet:
        if "image_set" not in self._cache:
            self._cache["image_set"] = ClopenSet(self.levels, self._cache["images"])
        return self._cache["image_set"]

    @property
    def defect(self) -> ClopenSet:
        return self.domain - self.covered

    @property
    def range_defect(self) -> ClopenSet:
        return self.range - self.image_set

    def images(self) -> list:
        return list(self._cache["images"])

    def power_at(self, w: Sequence[int]):
        """Power on ``[w]`` if one piece covers it, else ``None``."""
        key = _covering(self._cache["words"], self._cache["wordset"], tuple(w))
        return None if key is None else self._cache["power"][key]

    def apply(self, w: Sequence[int]):
        k = self.power_at(w)
        return None if k is None else shift(self.levels, w, k)

    def image(self, a: ClopenSet) -> ClopenSet:
        out = []
        words = self._cache["words"]
        asorted = a._sorted_words()
        for w, k in self.pieces:
            if a.contains_word(w):
                out.append(shift(self.levels, w, k))
            else:
                out.extend(shift(self.levels, u, k) for u in _extending(asorted, w))
        return ClopenSet(self.levels, out)

    def preimage(self, b: ClopenSet) -> ClopenSet:
        return self.invert().image(b)

    def invert(self) -> "GroupoidMap":
        pieces = [(im, -k) for im, (_, k) in zip(self._cache["images"], self.pieces)]
        return GroupoidMap(self.levels, tuple(pieces), self.range, self.domain)

    def restrict(self, a: ClopenSet) -> "GroupoidMap":
        """Same map with domain ``a ∩ domain``; range shrinks to the image."""
        pieces = []
        asorted = a._sorted_words()
        for w, k in self.pieces:
            if a.contains_word(w):
                pieces.append((w, k))
            else:
                pieces.extend((u, k) for u in _extending(asorted, w))
        dom = self.domain & a
        return GroupoidMap.build(self.levels, pieces, dom, None)

    def compose(self, f: "GroupoidMap") -> "GroupoidMap":
        """``self o f``: apply ``f`` first.  Uncovered points become defect."""
        g = self
        gwords = g._cache["words"]
        gset = g._cache["wordset"]
        gpow = g._cache["power"]
        out = []
        for (p, k), q in zip(f.pieces, f._cache["images"]):
            key = _covering(gwords, gset, q)
            if key is not None:
                out.append((p, k + gpow[key]))
                continue
            for p2 in _extending(gwords, q):
                out.append((shift(self.levels, p2, -k), k + gpow[p2]))
        return GroupoidMap.build(self.levels, out, f.domain, g.range).merged()

    __matmul__ = compose

    def merged(self) -> "GroupoidMap":
        """Merge complete sibling families with equal power when the parent still translates."""
        cur = dict(self.pieces)
        changed = True
        while changed:
            changed = False
            groups: dict = {}
            for w, k in cur.items():
                if w:
                    groups.setdefault((w[:-1], k), []).append(w)
            for (parent, k), kids in groups.items():
                if len(kids) == self.levels.size(len(parent)) and shift(self.levels, parent, k) is not None:
                    for kid in kids:
                        del cur[kid]
                    cur[parent] = k
                    changed = True
        return GroupoidMap(self.levels, tuple(cur.items()), self.domain, self.range)

    def equivalent(self, other: "GroupoidMap") -> bool:
        """Same domain, range, covered set and the same power at every point."""
        if self.domain != other.domain or self.range != other.range:
            return False
        if self.covered != other.covered:
            return False
        for w, k in self.pieces:
            kk = other.power_at(w)
            if kk is not None:
                if kk != k:
                    return False
                continue
            for u in _extending(other._cache["words"], w):
                if other._cache["power"][u] != k:
                    return False
        return True

    def piece_ratios(self, sys: OdometerSystem) -> list:
        """``(word, power, ratio)`` with the cocycle constant on each (refined) piece."""
        out = []
        dd = sys.measure.density_depth
        m = sys.measure
        for w, k in self.pieces:
            for u in self.levels.extensions(w, max(dd, len(w))):
                v = shift(self.levels, u, k)
                out.append((u, k, m.cylinder(v) / m.cylinder(u)))
        return out


def identity_map(a: ClopenSet) -> GroupoidMap:
    return GroupoidMap(a.levels, tuple((w, 0) for w in a.words), a, a)


# -- first-hit walker -----------------------------------------------------------------


class _Stepper:
    """Incremental one-step cocycle along the odometer orbit of a cylinder."""

    def __init__(self, sys: OdometerSystem):
        self.sys = sys
        self.levels = sys.levels
        self.m = sys.measure
        self.dd = sys.measure.density_depth
        self._z: dict = {}

    def wrap_factor(self, j: int) -> Fraction:
        if j not in self._z:
            ws = self.m.level_weights(j)
            self._z[j] = ws[0] / ws[-1]
        return self._z[j]

    def step(self, digits: list):
        """Advance ``digits`` by one in place; return the one-step ratio or ``None`` on escape."""
        lv = self.levels
        ratio = Fraction(1)
        old_head = tuple(digits[: self.dd]) if self.dd else None
        for j in range(len(digits)):
            s = lv.size(j)
            if digits[j] < s - 1:
                ws = self.m.level_weights(j)
                ratio *= ws[digits[j] + 1] / ws[digits[j]]
                digits[j] += 1
                if self.dd:
                    ratio *= self.m.density_at(tuple(digits[: self.dd])) / self.m.density_at(old_head)
                return ratio
            ratio *= self.wrap_factor(j)
            digits[j] = 0
        # carry left the word: restore the all-max state
        for j in range(len(digits)):
            digits[j] = lv.size(j) - 1
        return None


def _walk(
    sys: OdometerSystem,
    starts: Iterable[Word],
    hit: Callable,
    step_bound: int,
    track_ratio: bool,
) -> tuple:
    """First ``k > 0`` with ``hit(digits, acc)`` for every point of each start cylinder.

    Returns ``(pieces, defect_words, timed_out_words)``.  When the carry
    leaves the current word the cylinder is split by the next letter and each
    child continues from the shared state; the all-maximal branch at
    ``depth_max`` and walks longer than ``step_bound`` become defect.
    """
    lv = sys.levels
    stepper = _Stepper(sys)
    pieces = []
    defect = []
    timed_out = []
    stack = [(tuple(w), list(w), 0, Fraction(1)) for w in starts]
    stack.reverse()
    while stack:
        w, digits, k, acc = stack.pop()
        while True:
            if k >= step_bound:
                timed_out.append(w)
                break
            r = stepper.step(digits)
            if r is None:
                if len(w) >= lv.depth_max:
                    defect.append(w)
                    break
                s = lv.size(len(w))
                for c in reversed(range(s)):
                    stack.append((w + (c,), digits + [c], k, acc))
                break
            k += 1
            if track_ratio:
                acc = acc * r
            if hit(digits, acc):
                pieces.append((w, k))
                break
    return pieces, defect, timed_out


def odometer_map(sys: OdometerSystem) -> GroupoidMap:
    """``T`` itself as a groupoid map; the all-maximal point at ``depth_max`` is defect."""
    pieces, _, _ = _walk(sys, [()], lambda d, a: True, 2, False)
    full = sys.space
    return GroupoidMap.build(sys.levels, pieces, full, full).merged()


def induced_map(sys: OdometerSystem, a: ClopenSet, step_bound: int = DEFAULT_STEP_BOUND) -> GroupoidMap:
    """First-return map ``T_A`` of ``T`` to the clopen set ``a``.

    Pieces are ``(cylinder, return time)``; cylinders whose return is not
    seen within ``step_bound`` steps, and the carry-escape branch, are left
    as defect.
    """
    if not a:
        raise CylinderError("induced map needs a non-empty set")
    D = a.depth
    lv = sys.levels
    sizes = lv.sizes(D)
    member = bytearray(lv.radix(D))
    for i in a.cells(D):
        member[i] = 1

    def hit(digits, _acc):
        return member[kernels.word_index(tuple(digits[:D]), sizes)] == 1

    pieces, _, _ = _walk(sys, a.refine_to_depth(D), hit, step_bound, False)
    return GroupoidMap.build(lv, pieces, a, a).merged()


def kac_audit(sys: OdometerSystem, g: GroupoidMap) -> dict:
    """Exact return-time bookkeeping for a first-return map.

    ``tower_mass`` sums the measure of every tower floor; it equals the
    measure of the union iff the towers are disjoint, and then
    ``tower_mass + uncovered == 1``.  For an invariant measure each floor
    has the mass of its base, so ``weighted_return_sum`` (``sum k*mu(piece)``)
    is the classical Kac sum and agrees with ``tower_mass``.
    """
    m = sys.measure
    lv = sys.levels
    weighted = sum((k * m.cylinder(w) for w, k in g.pieces), Fraction(0))
    floors = [shift(lv, w, j) for w, k in g.pieces for j in range(k)]
    tower_mass = sum((m.cylinder(v) for v in floors), Fraction(0))
    covered = m.measure_of(ClopenSet(lv, floors))
    uncovered = 1 - covered
    return {
        "weighted_return_sum": weighted,
        "tower_mass": tower_mass,
        "uncovered_measure": uncovered,
        "towers_disjoint": tower_mass == covered,
        "identity_holds": tower_mass == covered and tower_mass + uncovered == 1,
    }


@dataclass(frozen=True)
class Tower:
    base: ClopenSet
    height: int
    levels: tuple
    residual: ClopenSet

    def is_disjoint(self) -> bool:
        seen = ClopenSet.empty(self.base.levels)
        for lvl in self.levels:
            if not seen.is_disjoint(lvl):
                return False
            seen = seen | lvl
        return True


def rokhlin_tower(target, n: int, eps: Fraction, sys: OdometerSystem | None = None, max_cells: int = 1 << 15) -> Tower:
    """Tower of height at least ``n + 1`` whose residual has measure < ``eps``.

    For the odometer itself the canonical cylinder castle is exact.  For a
    groupoid map the domain is cut at increasing depth into runs of length
    ``n + 1`` along the map's cylinder orbits.
    """
    eps = Fraction(eps)
    if n < 1 or eps <= 0:
        raise CylinderError("need n >= 1 and eps > 0")
    if isinstance(target, OdometerSystem):
        lv = target.levels
        d = 1
        while lv.radix(d) < n + 1:
            d += 1
            if d > lv.depth_max:
                raise TowerSearchFailed("height exceeds depth_max castle")
        words = lv.words(d)
        lvls = tuple(ClopenSet.of(lv, w) for w in words)
        return Tower(lvls[0], len(words), lvls, ClopenSet.empty(lv))
    g: GroupoidMap = target
    if sys is None:
        raise CylinderError("a measure is needed to bound the residual of a map tower")
    lv = g.levels
    m = sys.measure
    h = n + 1
    start = min((len(w) for w, _ in g.pieces), default=0)
    for D in range(start, lv.depth_max + 1):
        cells = []
        for w, k in g.pieces:
            cells.extend((u, k) for u in lv.extensions(w, max(D, len(w))))
        if len(cells) > max_cells:
            break
        ids = {u: i for i, (u, _) in enumerate(cells)}
        nxt = [ids.get(shift(lv, u, k), -1) for u, k in cells]
        starts = kernels.chain_cuts(nxt, h)
        layers = [[] for _ in range(h)]
        for s in starts:
            i = s
            for j in range(h):
                layers[j].append(cells[i][0])
                i = nxt[i]
        lvls = tuple(ClopenSet(lv, layer) for layer in layers)
        used = ClopenSet(lv, [w for layer in layers for w in layer])
        residual = g.domain - used
        if m.measure_of(residual) < eps:
            return Tower(lvls[0], h, lvls, residual)
    raise TowerSearchFailed(f"no tower of height {h} with residual < {eps} within depth/cell budget")


def mp_return_map(sys: OdometerSystem, step_bound: int = DEFAULT_STEP_BOUND, lam: Fraction | None = None) -> GroupoidMap:
    """``R = T**n(x)`` with ``n(x)`` the least positive time of cocycle exactly 1."""
    from finitary_oe.krieger import check_special, ratio_lattice

    if lam is None:
        lat = ratio_lattice(sys)
        lam = lat.lam if lat.kind == "cyclic" else None
    if lam is not None:
        ok, bad = check_special(sys, lam)
        if not ok:
            raise NotSpecialMeasure(f"cocycle leaves {lam}^Z at {bad[:3]}")
    elif ratio_lattice(sys).kind != "trivial":
        raise NotSpecialMeasure("value group is not cyclic")
    start_depth = max(sys.measure.density_depth, 0)
    starts = sys.levels.words(start_depth)
    pieces, _, _ = _walk(sys, starts, lambda d, acc: acc == 1, step_bound, True)
    full = sys.space
    return GroupoidMap.build(sys.levels, pieces, full, full).merged()
