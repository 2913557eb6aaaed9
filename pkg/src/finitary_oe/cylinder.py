"""Symbolic Cantor product space, its clopen algebra, and product measures.

A point of ``X = C_1 x C_2 x ...`` is addressed by finite prefixes (words);
a clopen set is a finite union of cylinders kept in a canonical antichain.
The alphabet sizes are eventually periodic: a finite prefix followed by a
repeating block.
"""

from __future__ import annotations

import bisect
import math
from collections import defaultdict
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

from finitary_oe import kernels

Word = tuple  # tuple[int, ...]; digit j lives in range(sizes[j])

__all__ = [
    "Word",
    "LevelSpec",
    "ClopenSet",
    "Measure",
    "CylinderError",
    "DepthExceeded",
    "ExactPackingUnavailable",
    "TargetSumMismatch",
    "ToleranceUnreachable",
    "canonicalize",
    "measure_of",
    "partition_exact",
    "partition_approx",
    "prefix_distance_depth",
]


class CylinderError(ValueError):
    pass


class DepthExceeded(CylinderError):
    pass


class ExactPackingUnavailable(CylinderError):
    pass


class TargetSumMismatch(CylinderError):
    pass


class ToleranceUnreachable(CylinderError):
    pass


@dataclass(frozen=True)
class LevelSpec:
    """Alphabet sizes ``prefix + block + block + ...`` and a depth ceiling."""

    prefix: tuple = ()
    block: tuple = (2,)
    depth_max: int = 32

    def __post_init__(self):
        object.__setattr__(self, "prefix", tuple(int(s) for s in self.prefix))
        object.__setattr__(self, "block", tuple(int(s) for s in self.block))
        if not self.block:
            raise CylinderError("repeating block must be non-empty")
        if any(s < 1 for s in self.prefix + self.block):
            raise CylinderError("alphabet sizes must be >= 1")
        if max(self.block) < 2:
            raise CylinderError("repeating block needs a size >= 2 (non-atomic measure)")
        if self.depth_max < len(self.prefix) + len(self.block):
            raise CylinderError("depth_max shorter than prefix + block")
        # hot path: sizes() is called for every shift and index computation
        n = self.depth_max + len(self.prefix) + 2 * len(self.block)
        table = tuple(self._size(j) for j in range(n))
        object.__setattr__(self, "_table", table)
        object.__setattr__(self, "_radix", tuple(math.prod(table[:d]) for d in range(n + 1)))

    def _size(self, j: int) -> int:
        if j < len(self.prefix):
            return self.prefix[j]
        return self.block[(j - len(self.prefix)) % len(self.block)]

    def size(self, j: int) -> int:
        t = self._table
        return t[j] if j < len(t) else self._size(j)

    def sizes(self, d: int) -> tuple:
        t = self._table
        return t[:d] if d <= len(t) else tuple(self._size(j) for j in range(d))

    def radix(self, d: int) -> int:
        """Number of depth-``d`` cylinders."""
        r = self._radix
        return r[d] if d < len(r) else math.prod(self.sizes(d))

    @property
    def period(self) -> int:
        return len(self.block)

    @property
    def tail_start(self) -> int:
        return len(self.prefix)

    def check_word(self, w: Sequence[int]) -> Word:
        if type(w) is not tuple:
            w = tuple(int(c) for c in w)
        if len(w) > self.depth_max:
            raise DepthExceeded(f"word of length {len(w)} exceeds depth_max={self.depth_max}")
        for j, (c, s) in enumerate(zip(w, self._table)):
            if not 0 <= c < s:
                raise CylinderError(f"letter {c} out of range at level {j} (size {s})")
        return w

    def index(self, w: Word) -> int:
        return kernels.word_index(tuple(w), self.sizes(len(w)))

    def word(self, idx: int, d: int) -> Word:
        return kernels.index_word(idx, self.sizes(d), d)

    def words(self, d: int) -> list:
        """All depth-``d`` words in odometer (index) order."""
        sizes = self.sizes(d)
        return [kernels.index_word(i, sizes, d) for i in range(self.radix(d))]

    def shifted(self, h: int) -> "LevelSpec":
        """Levels ``h, h+1, ...`` as a system of their own."""
        start = max(h, self.tail_start)
        prefix = tuple(self.size(j) for j in range(h, start))
        r = (start - self.tail_start) % self.period
        block = self.block[r:] + self.block[:r]
        return LevelSpec(prefix, block, max(self.depth_max - h, len(prefix) + len(block)))

    def extensions(self, w: Word, d: int) -> list:
        """Extensions of ``w`` to depth ``d`` in odometer order."""
        w = tuple(w)
        if d > self.depth_max:
            raise DepthExceeded(f"refinement to depth {d} exceeds depth_max={self.depth_max}")
        if d <= len(w):
            return [w]
        out = [w]
        for j in range(len(w), d):
            s = self.size(j)
            out = [u + (c,) for c in range(s) for u in out]
        return out


def has_prefix_pair(sorted_words: Sequence[Word]) -> bool:
    """True if some word is a prefix of another; ``sorted_words`` must be in lexicographic order."""
    return any(v[: len(u)] == u for u, v in zip(sorted_words, sorted_words[1:]))


def canonicalize(levels: LevelSpec, words: Iterable[Sequence[int]]) -> frozenset:
    """Canonical antichain: prefix absorption, then complete-sibling merging."""
    ws = {levels.check_word(w) for w in words}
    if () in ws:
        return frozenset({()})
    kept = []
    for w in sorted(ws):
        # in lexicographic order a word's extensions follow it directly
        if kept and w[: len(kept[-1])] == kept[-1]:
            continue
        kept.append(w)
    by_len: dict = defaultdict(set)
    for w in kept:
        by_len[len(w)].add(w)
    for L in range(max(by_len, default=0), 0, -1):
        groups: dict = defaultdict(list)
        for w in by_len.get(L, ()):
            groups[w[:-1]].append(w)
        full = levels.size(L - 1)
        for parent, kids in groups.items():
            if len(kids) == full:
                by_len[L].difference_update(kids)
                by_len[L - 1].add(parent)
    return frozenset(w for ws_ in by_len.values() for w in ws_)


@dataclass(frozen=True)
class ClopenSet:
    """Finite union of cylinders in canonical antichain form."""

    levels: LevelSpec
    words: frozenset = frozenset()

    def __post_init__(self):
        object.__setattr__(self, "words", canonicalize(self.levels, self.words))

    @classmethod
    def full(cls, levels: LevelSpec) -> "ClopenSet":
        return cls(levels, frozenset({()}))

    @classmethod
    def empty(cls, levels: LevelSpec) -> "ClopenSet":
        return cls(levels, frozenset())

    @classmethod
    def of(cls, levels: LevelSpec, *words) -> "ClopenSet":
        return cls(levels, frozenset(tuple(w) for w in words))

    def __bool__(self):
        return bool(self.words)

    def __iter__(self):
        return iter(self.sorted())

    def __len__(self):
        return len(self.words)

    def sorted(self) -> list:
        return sorted(self.words, key=lambda w: (len(w), w))

    def _sorted_words(self) -> list:
        # lexicographic order, so extensions of a word form a contiguous run
        d = self.__dict__
        if "_lex" not in d:
            object.__setattr__(self, "_lex", sorted(self.words))
        return d["_lex"]

    @property
    def depth(self) -> int:
        return max((len(w) for w in self.words), default=0)

    def _prefix_closure(self) -> set:
        return {w[:k] for w in self.words for k in range(len(w))}

    def contains_word(self, w: Word) -> bool:
        """True iff the whole cylinder ``[w]`` lies in the set."""
        w = tuple(w)
        return any(w[:k] in self.words for k in range(len(w) + 1))

    def meets_word(self, w: Word) -> bool:
        w = tuple(w)
        if self.contains_word(w):
            return True
        return any(u[: len(w)] == w for u in self.words)

    def union(self, other: "ClopenSet") -> "ClopenSet":
        return ClopenSet(self.levels, self.words | other.words)

    __or__ = union

    def intersection(self, other: "ClopenSet") -> "ClopenSet":
        a, b = self.words, other.words
        out = {w for w in a if any(w[:k] in b for k in range(len(w) + 1))}
        out |= {w for w in b if any(w[:k] in a for k in range(len(w) + 1))}
        return ClopenSet(self.levels, out)

    __and__ = intersection

    def complement(self) -> "ClopenSet":
        words = self.words
        closure = self._prefix_closure()
        out = []
        stack = [()]
        while stack:
            p = stack.pop()
            if p in words:
                continue
            if p not in closure:
                out.append(p)
                continue
            s = self.levels.size(len(p))
            stack.extend(p + (c,) for c in range(s))
        return ClopenSet(self.levels, out)

    def difference(self, other: "ClopenSet") -> "ClopenSet":
        if not other.words:
            return self
        return self.intersection(other.complement())

    __sub__ = difference

    def is_subset(self, other: "ClopenSet") -> bool:
        return all(other.contains_word(w) for w in self.words)

    def is_disjoint(self, other: "ClopenSet") -> bool:
        return not self.intersection(other)

    def refine_to_depth(self, d: int) -> list:
        """Same set written with words of length >= ``d`` (odometer order within each word)."""
        out = []
        for w in self.sorted():
            out.extend(self.levels.extensions(w, d))
        return out

    def cells(self, d: int) -> list:
        """Depth-``d`` cylinders (as indices) of a set of depth <= ``d``, sorted."""
        if self.depth > d:
            raise CylinderError(f"set has depth {self.depth} > {d}")
        return sorted(self.levels.index(w) for w in self.refine_to_depth(d))


def prefix_distance_depth(eps: Fraction) -> int:
    """Smallest ``k`` with ``2**-k < eps``: atoms inside depth-``k`` cylinders have diameter < eps."""
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    k = 0
    while Fraction(1, 2**k) >= eps:
        k += 1
    return k


@dataclass(frozen=True, eq=False)
class Measure:
    """Product measure with eventually periodic weights times a locally constant density.

    ``density`` maps an antichain of words to positive rationals; points not
    under any key carry density 1.  The total mass is normalised to 1.
    """

    levels: LevelSpec
    prefix_weights: tuple
    block_weights: tuple
    density: tuple = ()  # sorted ((word, Fraction), ...)
    _cache: dict = field(default_factory=dict, repr=False, compare=False)

    def __post_init__(self):
        pw = tuple(tuple(Fraction(x) for x in ws) for ws in self.prefix_weights)
        bw = tuple(tuple(Fraction(x) for x in ws) for ws in self.block_weights)
        dens = self.density
        if isinstance(dens, dict):
            dens = dens.items()
        dens = tuple(sorted((tuple(w), Fraction(v)) for w, v in dens))
        object.__setattr__(self, "prefix_weights", pw)
        object.__setattr__(self, "block_weights", bw)
        object.__setattr__(self, "density", dens)
        lv = self.levels
        if len(pw) != len(lv.prefix) or len(bw) != len(lv.block):
            raise CylinderError("weight vectors do not match the level layout")
        for j, ws in enumerate(pw + bw):
            size = lv.size(j)
            if len(ws) != size:
                raise CylinderError(f"level {j}: {len(ws)} weights for alphabet of size {size}")
            if any(x < 0 for x in ws):
                raise CylinderError(f"level {j}: negative weight")
            if sum(ws) != 1:
                raise CylinderError(f"level {j}: weights sum to {sum(ws)}, not 1")
        for ws in bw:
            if any(x == 0 for x in ws):
                raise CylinderError("zero weight in the repeating block (full support)")
        keys = [w for w, _ in dens]
        for w, v in dens:
            lv.check_word(w)
            if v <= 0:
                raise CylinderError("density values must be positive")
        keyset = set(keys)
        if any(w[:k] in keyset for w in keys for k in range(len(w))):
            raise CylinderError("density keys must form an antichain")
        self._cache["keys"] = keys
        self._cache["vals"] = [v for _, v in dens]
        total = Fraction(1)
        for w, v in dens:
            total += (v - 1) * self.base(w)
        self._cache["norm"] = 1 / total

    # -- construction helpers -------------------------------------------------
    @classmethod
    def product(cls, levels: LevelSpec, prefix_weights=(), block_weights=(), density=()) -> "Measure":
        return cls(levels, tuple(prefix_weights), tuple(block_weights), density)

    @classmethod
    def uniform(cls, levels: LevelSpec) -> "Measure":
        pw = tuple(tuple(Fraction(1, s) for _ in range(s)) for s in levels.prefix)
        bw = tuple(tuple(Fraction(1, s) for _ in range(s)) for s in levels.block)
        return cls(levels, pw, bw)

    def with_density(self, density) -> "Measure":
        return Measure(self.levels, self.prefix_weights, self.block_weights, density)

    def times_density(self, factor: dict) -> "Measure":
        """New measure ``factor * self`` (``factor`` keyed by an antichain of words)."""
        if not factor:
            return self
        mine = dict(self.density)
        fkeys = sorted(factor)
        cells = _common_refinement(self.levels, list(factor) + list(mine))
        table = {w: _lookup(fkeys, factor, w) * _lookup(self._cache["keys"], mine, w) for w in cells}
        return Measure(self.levels, self.prefix_weights, self.block_weights, _merge_density(self.levels, table))

    def shifted(self, h: int) -> "Measure":
        """Product measure of levels ``h, h+1, ...``.

        For ``h >= density_depth`` the measure factors:
        ``mu([w] x Q) = mu([w]) * shifted(h)(Q)`` for ``len(w) == h``.
        """
        if h < self.density_depth:
            raise CylinderError(f"density reaches depth {self.density_depth} > {h}; the tail does not factor")
        lv = self.levels.shifted(h)
        start = max(h, self.levels.tail_start)
        pw = tuple(self.level_weights(j) for j in range(h, start))
        bw = tuple(self.level_weights(j) for j in range(start, start + self.levels.period))
        return Measure(lv, pw, bw)

    def key(self) -> tuple:
        return (self.levels, self.prefix_weights, self.block_weights, self.density)

    def __eq__(self, other):
        return isinstance(other, Measure) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())

    @property
    def normalization(self) -> Fraction:
        return self._cache["norm"]

    @property
    def density_depth(self) -> int:
        return max((len(w) for w, _ in self.density), default=0)

    def weight(self, j: int, c: int) -> Fraction:
        lv = self.levels
        if j < len(lv.prefix):
            return self.prefix_weights[j][c]
        return self.block_weights[(j - len(lv.prefix)) % len(lv.block)][c]

    def level_weights(self, j: int) -> tuple:
        lv = self.levels
        if j < len(lv.prefix):
            return self.prefix_weights[j]
        return self.block_weights[(j - len(lv.prefix)) % len(lv.block)]

    def common_denominator(self, d: int) -> int:
        """An integer ``D`` with ``D * mu([w])`` integral for every ``w`` of length ``d``."""
        D = self.normalization.denominator * math.lcm(*(v.denominator for v in self._cache["vals"]))
        for j in range(d):
            D *= math.lcm(*(q.denominator for q in self.level_weights(j)))
        return D

    def base(self, w: Word) -> Fraction:
        """Product of the level weights along ``w`` (no density)."""
        memo = self._cache.setdefault("base", {})
        out = memo.get(w)
        if out is not None:
            return out
        num = den = 1
        for j, c in enumerate(w):
            q = self.weight(j, c)
            num *= q.numerator
            den *= q.denominator
        out = Fraction(num, den)
        if len(memo) > 1 << 18:
            memo.clear()
        memo[w] = out
        return out

    def density_at(self, w: Word) -> Fraction:
        """Density on ``[w]``; requires ``[w]`` to lie inside one density cell."""
        keys = self._cache["keys"]
        vals = self._cache["vals"]
        w = tuple(w)
        i = bisect.bisect_right(keys, w) - 1
        if i >= 0 and w[: len(keys[i])] == keys[i]:
            return vals[i]
        j = bisect.bisect_left(keys, w)
        if j < len(keys) and keys[j][: len(w)] == w:
            raise CylinderError(f"density not constant on cylinder {w}")
        return Fraction(1)

    def cylinder(self, w: Word) -> Fraction:
        w = tuple(w)
        keys = self._cache["keys"]
        vals = self._cache["vals"]
        i = bisect.bisect_right(keys, w) - 1
        if i >= 0 and w[: len(keys[i])] == keys[i]:
            return self.normalization * vals[i] * self.base(w)
        j = bisect.bisect_left(keys, w)
        b = self.base(w)
        extra = Fraction(0)
        while j < len(keys) and keys[j][: len(w)] == w:
            extra += (vals[j] - 1) * self.base(keys[j])
            j += 1
        return self.normalization * (b + extra)

    def measure_of(self, a: ClopenSet) -> Fraction:
        return sum((self.cylinder(w) for w in a.words), Fraction(0))

    def cylinder_measures(self, d: int) -> list:
        """Measures of all depth-``d`` cylinders in odometer index order (cached)."""
        key = ("cm", d)
        if key in self._cache:
            return self._cache[key]
        vals = [self.normalization]
        for j in range(d):
            ws = self.level_weights(j)
            vals = [v * x for x in ws for v in vals]
        if self.density:
            if d >= self.density_depth:
                sizes = self.levels.sizes(d)
                vals = [v * self.density_at(kernels.index_word(i, sizes, d)) for i, v in enumerate(vals)]
            else:
                vals = [self.cylinder(w) for w in self.levels.words(d)]
        self._cache[key] = vals
        return vals


def _lookup(keys: list, table: dict, w: Word) -> Fraction:
    i = bisect.bisect_right(keys, w) - 1
    if i >= 0 and w[: len(keys[i])] == keys[i]:
        return table[keys[i]]
    return Fraction(1)


def _common_refinement(levels: LevelSpec, keys: list) -> list:
    """Cells refining several antichains so each cell sits inside at most one key of each."""
    keyset = set(keys)
    closure = {w[:k] for w in keyset for k in range(len(w))}
    roots = [w for w in keyset if not any(w[:k] in keyset for k in range(len(w)))]
    cells = []
    stack = list(roots)
    while stack:
        w = stack.pop()
        if w in closure:
            stack.extend(w + (c,) for c in range(levels.size(len(w))))
        else:
            cells.append(w)
    return cells


def _merge_density(levels: LevelSpec, table: dict) -> dict:
    """Merge complete equal-valued sibling families, then drop unit cells."""
    cur = dict(table)
    depth = max((len(w) for w in cur), default=0)
    for L in range(depth, 0, -1):
        groups: dict = defaultdict(list)
        for w in [w for w in cur if len(w) == L]:
            groups[w[:-1]].append(w)
        size = levels.size(L - 1)
        for parent, kids in groups.items():
            vals = {cur[k] for k in kids}
            if len(kids) == size and len(vals) == 1:
                v = vals.pop()
                for k in kids:
                    del cur[k]
                cur[parent] = v
    return {w: v for w, v in cur.items() if v != 1}


def measure_of(a: ClopenSet, m: Measure) -> Fraction:
    return m.measure_of(a)


# -- exact and approximate packings----------------------------------------------


def _scaled_classes(values: list) -> tuple:
    den = math.lcm(*(v.denominator for v in values)) if values else 1
    return den, [int(v * den) for v in values]


def _classes(cells: list, values: list) -> list:
    """Group cell ids by measure value, largest value first, cells in order."""
    groups: dict = defaultdict(list)
    for c, v in zip(cells, values):
        groups[v].append(c)
    return sorted(groups.items(), key=lambda kv: -kv[0])


def _multiset_subset_sum(classes: list, counts: list, target: Fraction, budget: list):
    """Counts per value class summing exactly to ``target``; largest-first DFS with backtracking."""
    n = len(classes)
    suffix = [Fraction(0)] * (n + 1)
    for i in range(n - 1, -1, -1):
        suffix[i] = suffix[i + 1] + classes[i][0] * counts[i]
    take = [0] * n

    def dfs(i: int, need: Fraction) -> bool:
        if need == 0:
            return True
        if i == n or need > suffix[i]:
            return False
        budget[0] -= 1
        if budget[0] < 0:
            return False
        v = classes[i][0]
        k = min(counts[i], int(need // v))
        while k >= 0:
            take[i] = k
            if dfs(i + 1, need - k * v):
                return True
            k -= 1
        take[i] = 0
        return False

    return list(take) if dfs(0, target) else None


def _cells_of(a: ClopenSet, d: int) -> list:
    # lexicographic, so siblings sit next to each other and merge when packed together
    return sorted(a.refine_to_depth(d))


def partition_exact(
    a: ClopenSet,
    targets: Sequence[Fraction],
    m: Measure,
    max_cells: int = 1 << 16,
    node_budget: int = 200_000,
) -> list:
    """Split ``a`` into clopen sets of exactly the target measures.

    Cylinders of a common depth are packed by a largest-first subset-sum
    search over measure classes; the depth grows until a packing exists or
    the cell budget / ``depth_max`` is reached.
    """
    targets = [Fraction(t) for t in targets]
    if any(t <= 0 for t in targets):
        raise CylinderError("targets must be positive")
    total = m.measure_of(a)
    if sum(targets) != total:
        raise TargetSumMismatch(f"targets sum to {sum(targets)}, set has measure {total}")
    levels = a.levels
    start = max(a.depth, m.density_depth)
    for d in range(start, levels.depth_max + 1):
        if _count_cells(a, d) > max_cells:
            break
        # necessary condition, checked before enumerating any cells
        D = m.common_denominator(d)
        if any((t * D).denominator != 1 for t in targets):
            continue
        cells = _cells_of(a, d)
        values = [m.cylinder(w) for w in cells]
        den, ints = _scaled_classes(values)
        g = math.gcd(*ints) if ints else 1
        if any((t * den).denominator != 1 or int(t * den) % g for t in targets):
            continue
        parts = _pack_exact(cells, values, targets, node_budget)
        if parts is not None:
            return [ClopenSet(levels, p) for p in parts]
    raise ExactPackingUnavailable(
        f"no exact packing of targets {[str(t) for t in targets]} up to depth limit"
    )


def _count_cells(a: ClopenSet, d: int) -> int:
    lv = a.levels
    total = 0
    for w in a.words:
        n = 1
        for j in range(len(w), d):
            n *= lv.size(j)
        total += n
    return total


def _pack_exact(cells, values, targets, node_budget):
    classes = _classes(cells, values)
    counts = [len(c) for _, c in classes]
    parts = []
    order = sorted(range(len(targets)), key=lambda i: -targets[i])
    chosen = [None] * len(targets)
    budget = [node_budget]
    for i in order:
        take = _multiset_subset_sum(classes, counts, targets[i], budget)
        if take is None:
            return None
        picked = []
        for k, (v, ids) in enumerate(classes):
            used = len(ids) - counts[k]
            picked.extend(ids[used : used + take[k]])
            counts[k] -= take[k]
        chosen[i] = picked
    parts = [chosen[i] for i in range(len(targets))]
    return parts


def partition_approx(
    a: ClopenSet,
    targets: Sequence[Fraction],
    m: Measure,
    tol: Fraction,
    max_cells: int = 1 << 16,
    max_depth: int | None = None,
) -> tuple:
    """Disjoint clopen sets within ``tol`` of each target, plus the leftover defect.

    Exact packings are returned unchanged when they exist.  Otherwise a
    greedy largest-first fill at the shallowest depth meeting ``tol`` is used;
    each part undershoots its target, so
    ``measure(defect) = sum(deviations) + measure(a) - sum(targets)``.
    """
    targets = [Fraction(t) for t in targets]
    tol = Fraction(tol)
    if tol < 0:
        raise CylinderError("tol must be non-negative")
    if any(t <= 0 for t in targets):
        raise CylinderError("targets must be positive")
    levels = a.levels
    total = m.measure_of(a)
    if sum(targets) > total:
        raise TargetSumMismatch(f"targets sum to {sum(targets)} > measure {total}")
    if sum(targets) == total:
        try:
            parts = partition_exact(a, targets, m, max_cells=max_cells)
            return parts, ClopenSet.empty(levels)
        except ExactPackingUnavailable:
            pass
    limit = levels.depth_max if max_depth is None else min(max_depth, levels.depth_max)
    start = max(a.depth, m.density_depth)
    for d in range(start, limit + 1):
        if _count_cells(a, d) > max_cells:
            break
        cells = _cells_of(a, d)
        values = [m.cylinder(w) for w in cells]
        parts = _pack_greedy(cells, values, targets)
        devs = [t - sum((m.cylinder(w) for w in p), Fraction(0)) for t, p in zip(targets, parts)]
        if all(dv <= tol for dv in devs):
            sets = [ClopenSet(levels, p) for p in parts]
            used = ClopenSet(levels, [w for p in parts for w in p])
            return sets, a.difference(used)
    raise ToleranceUnreachable(f"tolerance {tol} not reached within depth/cell budget")


def _pack_greedy(cells, values, targets):
    classes = _classes(cells, values)
    counts = [len(c) for _, c in classes]
    parts = []
    for t in targets:
        need = t
        picked = []
        for k, (v, ids) in enumerate(classes):
            if need <= 0:
                break
            if counts[k] == 0 or v > need:
                continue
            take = min(counts[k], int(need // v))
            used = len(ids) - counts[k]
            picked.extend(ids[used : used + take])
            counts[k] -= take
            need -= take * v
        parts.append(picked)
    return parts
