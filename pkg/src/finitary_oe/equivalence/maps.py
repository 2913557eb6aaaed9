"""Equimeasure and skew maps built by cylinder exhaustion.

A skew map ``S: A -> B`` with prescribed cocycle ``rho`` is assembled from
pieces ``T**k: [u] -> [v]`` where ``u, v`` are cylinders of one depth with
``mu(v) = rho * mu(u)`` (or within ``exp(+-eps)`` of it).  Unmatched
cylinders are refined one level and retried; what is left at the depth or
cell limit is the defect.
"""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

from finitary_oe.cylinder import ClopenSet, CylinderError, ExactPackingUnavailable, partition_approx
from finitary_oe.exact import exp_bracket, flog
from finitary_oe.odometer import GroupoidMap, OdometerSystem, identity_map, shift

__all__ = [
    "ExhaustionStalled",
    "WitnessNotFound",
    "MatchResult",
    "TupleResult",
    "tuple_exhaustion",
    "match_tuples",
    "equimeasure_map_mp",
    "skew_map_lambda",
    "skew_map_eps",
    "UniformRelation",
    "CopyResult",
    "natural_extension",
    "copy_structure_lambda",
    "copy_structure_eps",
    "refine_uniform",
    "agree_set",
    "Projection",
    "stable_set",
]


class ExhaustionStalled(CylinderError):
    pass


class WitnessNotFound(CylinderError):
    pass


class _Ratio:
    """Acceptance test for ``mu(v) / mu(u)`` against a target ratio."""

    def __init__(self, rho: Fraction, eps: Fraction | None):
        self.rho = Fraction(rho)
        self.eps = None if eps is None else Fraction(eps)
        if self.eps is not None:
            lo, _ = exp_bracket(self.eps)
            self.lo = self.rho / lo
            self.hi = self.rho * lo

    def ok(self, q: Fraction) -> bool:
        if self.eps is None:
            return q == self.rho
        return self.lo <= q <= self.hi


class _Pool:
    """Available cylinders of one destination, bucketed by measure."""

    def __init__(self, cells: list, ms: list):
        self.buckets: dict = {}
        for w, m in zip(cells, ms):
            self.buckets.setdefault(m, []).append(w)
        for v in self.buckets.values():
            v.reverse()  # pop() yields the lexicographically first word
        self.keys = sorted(self.buckets)

    def take(self, want: Fraction, test: _Ratio, mu_u: Fraction):
        b = self.buckets.get(want)
        if b:
            return want, b.pop()
        if test.eps is None:
            return None
        lo, hi = test.lo * mu_u, test.hi * mu_u
        i = bisect.bisect_left(self.keys, lo)
        best = None
        while i < len(self.keys) and self.keys[i] <= hi:
            k = self.keys[i]
            if self.buckets[k]:
                d = abs(flog(k / want))
                if best is None or d < best[0]:
                    best = (d, k)
            i += 1
        if best is None:
            return None
        return best[1], self.buckets[best[1]].pop()

    def give_back(self, m: Fraction, w) -> None:
        self.buckets[m].append(w)

    def leftover(self) -> list:
        return sorted(w for v in self.buckets.values() for w in v)


@dataclass(frozen=True)
class MatchResult:
    base: ClopenSet
    maps: tuple  # GroupoidMap base -> dst_i, one per destination
    src_defect: ClopenSet
    dst_defects: tuple
    depth_reached: int


def match_tuples(
    sys: OdometerSystem,
    src: ClopenSet,
    dsts: Sequence[ClopenSet],
    rhos: Sequence[Fraction],
    eps: Fraction | None = None,
    max_depth: int | None = None,
    max_cells: int = 1 << 17,
) -> MatchResult:
    """Simultaneous exhaustion: cylinders ``u`` of ``src`` with a partner in every ``dst_i``.

    Each committed ``u`` gets ``v_i`` with ``mu(v_i)/mu(u)`` equal to (or
    within ``exp(+-eps)`` of) ``rho_i``; the piece is ``T**(idx v_i - idx u)``.
    Ties are broken lexicographically on words.
    """
    lv = sys.levels
    m = sys.measure
    tests = [_Ratio(r, eps) for r in rhos]
    limit = lv.depth_max if max_depth is None else min(max_depth, lv.depth_max)
    start = max([src.depth, m.density_depth] + [d.depth for d in dsts])
    src_left = list(src.words)
    dst_left = [list(d.words) for d in dsts]
    pieces = [[] for _ in dsts]
    base = []
    D = start
    for D in range(start, limit + 1):
        if not src_left:
            break
        ucells = sorted(u for w in src_left for u in lv.extensions(w, D))
        vcells = [sorted(v for w in left for v in lv.extensions(w, D)) for left in dst_left]
        if len(ucells) + sum(map(len, vcells)) > max_cells:
            break
        ms = m.cylinder_measures(D) if lv.radix(D) <= max_cells else None

        def mu(w):
            return ms[lv.index(w)] if ms is not None else m.cylinder(w)

        pools = [_Pool(vs, [mu(v) for v in vs]) for vs in vcells]
        unmatched = []
        for u in ucells:
            mu_u = mu(u)
            got = []
            for pool, t in zip(pools, tests):
                hit = pool.take(t.rho * mu_u, t, mu_u)
                if hit is None:
                    break
                got.append(hit)
            if len(got) < len(pools):
                for (mv, v), pool in zip(got, pools):
                    pool.give_back(mv, v)
                unmatched.append(u)
                continue
            base.append(u)
            iu = lv.index(u)
            for k, (_, v) in enumerate(got):
                pieces[k].append((u, lv.index(v) - iu))
        src_left = unmatched
        dst_left = [p.leftover() for p in pools]
    base_set = ClopenSet(lv, base)
    maps = []
    for k, ps in enumerate(pieces):
        g = GroupoidMap.build(lv, ps, base_set, None).merged()
        maps.append(g)
    return MatchResult(
        base_set,
        tuple(maps),
        ClopenSet(lv, src_left),
        tuple(ClopenSet(lv, left) for left in dst_left),
        D,
    )


@dataclass(frozen=True)
class TupleResult:
    base: tuple  # words of the fundamental set
    pieces: tuple  # per fiber: ((word, power), ...) from base cells
    leftover: tuple  # words left unmatched
    leftover_measure: Fraction
    depth_reached: int


def tuple_exhaustion(
    sys: OdometerSystem,
    z: ClopenSet,
    rhos: Sequence[Fraction],
    eps: Fraction | None = None,
    tol: Fraction = Fraction(0),
    max_depth: int | None = None,
    max_cells: int = 1 << 17,
) -> TupleResult:
    """Cut most of ``z`` into tuples ``(u_0, ..., u_{r-1})`` with ``mu(u_c) = rho_c mu(u_0)``.

    All tuple members come from one shared pool of equal-length cylinders.
    The heaviest fiber anchors each tuple and classes are tried from the
    heaviest measure down.  Leftover cells are refined by one letter per
    round until their measure is at most ``tol`` or a limit is hit.
    ``rhos[0]`` must be 1.  With ``eps`` the partner measures only need to
    lie within ``exp(+-eps)`` of the prescribed ones.
    """
    lv = sys.levels
    m = sys.measure
    rhos = [Fraction(x) for x in rhos]
    if rhos[0] != 1 or any(x <= 0 for x in rhos):
        raise CylinderError("rhos must be positive with rhos[0] == 1")
    r = len(rhos)
    top = max(range(r), key=lambda c: (rhos[c], -c))
    rel = [x / rhos[top] for x in rhos]
    tests = [_Ratio(x, None if eps is None else Fraction(eps)) for x in rel]
    limit = lv.depth_max if max_depth is None else min(max_depth, lv.depth_max)
    waiting = sorted(((w, m.cylinder(w)) for w in z.words), key=lambda t: (len(t[0]), t[0]))
    active: list = []
    base = []
    pieces = [[] for _ in range(r)]
    D = min((len(w) for w, _ in waiting), default=0)
    dd = m.density_depth
    while True:
        while waiting and len(waiting[0][0]) <= D:
            active.append(waiting.pop(0))
        if r == 1:
            base.extend(w for w, _ in active)
            pieces[0].extend((w, 0) for w, _ in active)
            active = []
        elif active:
            pool = _Pool([w for w, _ in active], [x for _, x in active])
            for key in sorted(pool.keys, reverse=True):
                b = pool.buckets[key]
                while b:
                    u = b.pop()
                    got = []
                    for c in range(r):
                        if c == top:
                            got.append((key, u))
                            continue
                        hit = pool.take(rel[c] * key, tests[c], key)
                        if hit is None:
                            break
                        got.append(hit)
                    if len(got) < r:
                        for c, (mv, v) in enumerate(got):
                            if c != top:
                                pool.give_back(mv, v)
                        b.append(u)
                        break
                    u0 = got[0][1]
                    i0 = lv.index(u0)
                    base.append(u0)
                    for c, (_, v) in enumerate(got):
                        pieces[c].append((u0, lv.index(v) - i0))
            active = [(w, mv) for mv, ws in pool.buckets.items() for w in ws]
        left = sum((x for _, x in active), Fraction(0)) + sum((x for _, x in waiting), Fraction(0))
        if (not active and not waiting) or left <= tol or D >= limit or len(active) * lv.size(D) > max_cells:
            break
        nxt = []
        for w, x in active:
            ws = m.level_weights(len(w))
            for c in range(lv.size(len(w))):
                u = w + (c,)
                nxt.append((u, m.cylinder(u) if len(u) <= dd else x * ws[c]))
        active = nxt
        D += 1
    leftover = tuple(sorted([w for w, _ in active] + [w for w, _ in waiting]))
    return TupleResult(tuple(base), tuple(tuple(p) for p in pieces), leftover, left, D)


def _single(sys, a, b, rho, eps, max_depth, max_cells) -> GroupoidMap:
    if not a:
        return GroupoidMap.build(sys.levels, [], a, b)
    res = match_tuples(sys, a, [b], [rho], eps, max_depth, max_cells)
    if not res.base:
        raise ExhaustionStalled("no matching cylinders found within the depth/cell budget")
    g = res.maps[0]
    return GroupoidMap(sys.levels, g.pieces, a, b)


def equimeasure_map_mp(sys: OdometerSystem, a: ClopenSet, b: ClopenSet, max_depth=None, max_cells=1 << 17) -> GroupoidMap:
    """Measure-preserving groupoid map ``a -> b`` (ratio exactly 1 on every piece)."""
    m = sys.measure
    if m.measure_of(a) != m.measure_of(b):
        raise CylinderError("equimeasure map needs mu(a) == mu(b)")
    if a == b:
        return identity_map(a)
    common = a & b
    rest = _single(sys, a - common, b - common, Fraction(1), None, max_depth, max_cells)
    pieces = list(rest.pieces) + [(w, 0) for w in common.words]
    return GroupoidMap(sys.levels, tuple(pieces), a, b)


def skew_map_lambda(sys: OdometerSystem, a: ClopenSet, b: ClopenSet, k: int, lam: Fraction, max_depth=None, max_cells=1 << 17) -> GroupoidMap:
    """Groupoid map ``a -> b`` whose cocycle is exactly ``lam**k`` on every piece."""
    lam = Fraction(lam)
    m = sys.measure
    if m.measure_of(b) != lam**k * m.measure_of(a):
        raise CylinderError(f"mu(b) != lambda^{k} mu(a)")
    if k == 0:
        return equimeasure_map_mp(sys, a, b, max_depth, max_cells)
    return _single(sys, a, b, lam**k, None, max_depth, max_cells)


def skew_map_eps(sys: OdometerSystem, a: ClopenSet, b: ClopenSet, eps, max_depth=None, max_cells=1 << 17) -> GroupoidMap:
    """Groupoid map ``a -> b`` with every piece's cocycle within ``exp(+-eps)`` of ``mu(b)/mu(a)``."""
    eps = Fraction(eps)
    if eps <= 0:
        raise CylinderError("eps must be positive")
    m = sys.measure
    if a == b:
        return identity_map(a)
    rho = m.measure_of(b) / m.measure_of(a)
    return _single(sys, a, b, rho, eps, max_depth, max_cells)


# -- uniform relations ------------------------------------------------------------------


@dataclass(frozen=True)
class UniformRelation:
    """``r`` disjoint copies of a fundamental set, sliced by splitting maps.

    ``splitting[i]`` maps ``fundamental`` onto fiber ``i``; ``splitting[0]``
    is the identity.  Points of ``ambient`` in no fiber are the defect.
    """

    r: int
    ambient: ClopenSet
    fundamental: ClopenSet
    splitting: tuple

    def __post_init__(self):
        if len(self.splitting) != self.r:
            raise CylinderError("need one splitting map per fiber")

    @property
    def levels(self):
        return self.ambient.levels

    def fibers(self) -> list:
        return [h.image(self.fundamental) for h in self.splitting]

    @property
    def defect(self) -> ClopenSet:
        out = self.ambient
        for f in self.fibers():
            out = out - f
        return out

    def check(self) -> list:
        """Violated invariants (empty when the relation is well formed)."""
        bad = []
        fibers = self.fibers()
        if fibers and fibers[0] != self.fundamental:
            bad.append("h_0 is not the identity on the fundamental set")
        for i, f in enumerate(fibers):
            if not f.is_subset(self.ambient):
                bad.append(f"fiber {i} leaves the ambient set")
            for j in range(i):
                if not f.is_disjoint(fibers[j]):
                    bad.append(f"fibers {j} and {i} overlap")
        return bad

    def projection(self) -> "Projection":
        pieces = []
        for h in self.splitting:
            pieces.extend(h.restrict(self.fundamental).invert().pieces)
        return Projection(self.levels, tuple(sorted(pieces)))

    def symmetry(self, perm: Sequence[int]) -> GroupoidMap:
        """Element of the finite group: fiber ``i`` -> fiber ``perm[i]``."""
        if sorted(perm) != list(range(self.r)):
            raise CylinderError("not a permutation")
        pieces = []
        for i, j in enumerate(perm):
            hi = self.splitting[i].restrict(self.fundamental)
            hj = self.splitting[j].restrict(self.fundamental)
            pieces.extend(hj.compose(hi.invert()).pieces)
        return GroupoidMap(self.levels, tuple(pieces), self.ambient, self.ambient)

    @classmethod
    def trivial(cls, a: ClopenSet) -> "UniformRelation":
        return cls(1, a, a, (identity_map(a),))


def natural_extension(s: UniformRelation, inner: UniformRelation) -> UniformRelation:
    """Lift ``inner`` (on ``fundamental(s)``) to the ambient set: fibers ``(i, j) -> i*q + j``."""
    if inner.ambient != s.fundamental:
        raise CylinderError("inner relation must live on the fundamental set")
    maps = []
    for h in s.splitting:
        for t in inner.splitting:
            g = h.compose(t.restrict(inner.fundamental))
            maps.append(GroupoidMap(g.levels, g.pieces, inner.fundamental, s.ambient))
    return UniformRelation(s.r * inner.r, s.ambient, inner.fundamental, tuple(maps))


@dataclass(frozen=True)
class Projection:
    """Many-to-one piecewise translation ``x -> T**p(x) x`` onto a fundamental set."""

    levels: object
    pieces: tuple

    def power_at(self, w) -> int | None:
        words = [u for u, _ in self.pieces]
        i = bisect.bisect_right(words, tuple(w)) - 1
        if i >= 0 and tuple(w)[: len(words[i])] == words[i]:
            return self.pieces[i][1]
        return None

    def finer(self, w) -> list:
        """Pieces strictly inside ``[w]``."""
        w = tuple(w)
        i = bisect.bisect_left(self.pieces, (w,))
        out = []
        while i < len(self.pieces) and self.pieces[i][0][: len(w)] == w:
            out.append(self.pieces[i])
            i += 1
        return out

    @property
    def domain(self):
        return ClopenSet(self.levels, [w for w, _ in self.pieces])


def stable_set(p: Projection) -> ClopenSet:
    """``{x : p(Tx) = p(x)}``, i.e. ``x`` and ``Tx`` project to the same point."""
    lv = p.levels
    out = []
    stack = list(reversed(p.pieces))
    while stack:
        w, k = stack.pop()
        v = shift(lv, w, 1)
        if v is None:
            if len(w) < lv.depth_max:
                stack.extend((w + (c,), k) for c in reversed(range(lv.size(len(w)))))
            continue
        kk = p.power_at(v)
        if kk is not None:
            if kk == k - 1:
                out.append(w)
            continue
        for u, kk in p.finer(v):
            if kk == k - 1:
                out.append(shift(lv, u, -1))
    return ClopenSet(lv, out)


def agree_set(f: GroupoidMap, g: GroupoidMap) -> ClopenSet:
    """Points where both maps are defined and act by the same power."""
    out = []
    gw = g._cache["words"]
    for w, k in f.pieces:
        kk = g.power_at(w)
        if kk is not None:
            if kk == k:
                out.append(w)
            continue
        i = bisect.bisect_left(gw, w)
        while i < len(gw) and gw[i][: len(w)] == w:
            if g._cache["power"][gw[i]] == k:
                out.append(gw[i])
            i += 1
    return ClopenSet(f.levels, out)


def refine_uniform(sys: OdometerSystem, s: UniformRelation, eps, heights=range(2, 65), step_bound: int = 10_000) -> tuple:
    """Uniform relation on ``fundamental(s)`` from a tower of the induced map, and the set ``O``.

    ``O = {x : x and Tx have the same image under the projection of the
    natural extension}``.  The first tower height whose ``O`` has measure
    above ``1 - 2 eps - mu(defect of s)`` is returned together with ``O``.
    """
    from finitary_oe.odometer import TowerSearchFailed, induced_map, rokhlin_tower

    eps = Fraction(eps)
    b = s.fundamental
    m = sys.measure
    tb = induced_map(sys, b, step_bound)
    last = None
    for h in heights:
        try:
            tower = rokhlin_tower(tb, h - 1, eps, sys)
        except TowerSearchFailed:
            continue
        base = tower.base
        maps = [identity_map(base)]
        cur = identity_map(base)
        for _ in range(1, h):
            cur = tb.compose(cur)
            maps.append(GroupoidMap(sys.levels, cur.pieces, base, b))
        inner = UniformRelation(h, b, base, tuple(maps))
        ext = natural_extension(s, inner)
        o = stable_set(ext.projection())
        last = (inner, o)
        # the tower residual and top floor share the 2 eps; only the defect of s is extra
        if m.measure_of(o) > 1 - 2 * eps - m.measure_of(s.defect):
            return inner, o
    if last is None:
        raise TowerSearchFailed("no tower found for any height")
    return last


# -- structure copying ----------------------------------------------------------------


@dataclass(frozen=True)
class CopyResult:
    relation: UniformRelation
    fundamental: ClopenSet
    labels: dict  # new label -> ClopenSet inside the fundamental set
    targets: dict  # (i, label) -> target measure actually requested
    packing_defect: ClopenSet
    match_defect: ClopenSet


def _copy(sys, b, u, v_tilde, nu, tol, eps, max_depth, max_cells) -> CopyResult:
    """Shared body of the lambda and eps structure copies.

    Each old label ``d`` is first shared among the new labels whose fibers
    use it.  A new label whose fibers all sit in one old label is then cut
    by :func:`tuple_exhaustion`; otherwise its fibers are packed separately
    and matched with :func:`match_tuples`.
    """
    lv = sys.levels
    m = sys.measure
    nu = {k: Fraction(v) for k, v in nu.items()}
    rs = sorted({i for i, _ in nu})
    r = len(rs)
    if rs != list(range(r)):
        raise CylinderError("fiber indices must be 0..r-1")
    new_labels = sorted({d for _, d in nu})
    home = {dt: {v_tilde[(i, dt)] for i in range(r)} for dt in new_labels}
    # old label -> [(new label, share)]
    shares: dict = {}
    for dt in new_labels:
        for d in sorted(home[dt]):
            mass = sum((nu[(i, dt)] for i in range(r) if v_tilde[(i, dt)] == d), Fraction(0))
            shares.setdefault(d, []).append((dt, mass))
    region: dict = {}
    targets: dict = {}
    pdefect = ClopenSet.empty(lv)
    for d, lst in sorted(shares.items()):
        U = u.get(d, ClopenSet.empty(lv))
        have = m.measure_of(U)
        if have == 0:
            continue
        want = [x for _, x in lst]
        if sum(want) > have:
            want = [x * have / sum(want) for x in want]
        if len(lst) == 1 and want[0] == have:
            ps, dfc = [U], ClopenSet.empty(lv)
        else:
            ps, dfc = partition_approx(U, want, m, tol, max_cells=max_cells)
        pdefect = pdefect | dfc
        for (dt, _), p, t in zip(lst, ps, want):
            region[(d, dt)] = p
            targets[(d, dt)] = t
    fund = []
    labels = {}
    pieces = [[] for _ in range(r)]
    mdefect = ClopenSet.empty(lv)
    for dt in new_labels:
        rhos = [nu[(i, dt)] / nu[(0, dt)] for i in range(r)]
        if len(home[dt]) == 1:
            (d,) = home[dt]
            z = region.get((d, dt), ClopenSet.empty(lv))
            if not z:
                continue
            res = tuple_exhaustion(sys, z, rhos, eps, tol, max_depth, max_cells)
            mdefect = mdefect | ClopenSet(lv, res.leftover)
            base = ClopenSet(lv, res.base)
            for i in range(r):
                pieces[i].extend(res.pieces[i])
        else:
            parts = {}
            for d in sorted(home[dt]):
                idx = [i for i in range(r) if v_tilde[(i, dt)] == d]
                z = region.get((d, dt), ClopenSet.empty(lv))
                if not z:
                    continue
                want = [nu[(i, dt)] for i in idx]
                have = m.measure_of(z)
                if sum(want) > have:
                    want = [x * have / sum(want) for x in want]
                ps, dfc = partition_approx(z, want, m, tol, max_cells=max_cells)
                pdefect = pdefect | dfc
                parts.update(zip(idx, ps))
            if len(parts) < r:
                for p in parts.values():
                    mdefect = mdefect | p
                continue
            res = match_tuples(sys, parts[0], [parts[i] for i in range(1, r)], rhos[1:], eps, max_depth, max_cells)
            mdefect = mdefect | res.src_defect
            for dd in res.dst_defects:
                mdefect = mdefect | dd
            base = res.base
            pieces[0].extend((w, 0) for w in base.words)
            for i, g in enumerate(res.maps, start=1):
                pieces[i].extend(g.pieces)
        labels[dt] = base
        fund.extend(base.words)
    fset = ClopenSet(lv, fund)
    maps = tuple(GroupoidMap.build(lv, ps, fset, b) for ps in pieces)
    rel = UniformRelation(r, b, fset, maps)
    return CopyResult(rel, fset, labels, targets, pdefect, mdefect)


def copy_structure_lambda(sys, b, u, v_tilde, nu, tol=Fraction(0), lam=None, max_depth=None, max_cells=1 << 17) -> CopyResult:
    """Copy a labelled uniform structure into ``b`` with exact fiber ratios ``nu(i,d)/nu(0,d)``.

    ``u`` labels ``b`` (label -> clopen set), ``v_tilde[(i, d~)]`` is the old
    label of fiber ``i`` over new label ``d~`` and ``nu`` the prescribed
    masses.  Fiber ratios must be powers of ``lam`` when ``lam`` is given.
    """
    if lam is not None:
        from finitary_oe.exact import power_of

        for (i, d), v in nu.items():
            if power_of(Fraction(v) / Fraction(nu[(0, d)]), Fraction(lam)) is None:
                raise CylinderError(f"nu({i},{d})/nu(0,{d}) is not a power of {lam}")
    return _copy(sys, b, u, v_tilde, nu, tol, None, max_depth, max_cells)


def copy_structure_eps(sys, b, u, v_tilde, nu, eps, tol=Fraction(0), max_depth=None, max_cells=1 << 17) -> CopyResult:
    """As :func:`copy_structure_lambda` with fiber ratios only within ``exp(+-eps)``."""
    return _copy(sys, b, u, v_tilde, nu, tol, Fraction(eps), max_depth, max_cells)
