"""Value groups of the tail cocycle, Krieger-type labels and special measures.

The one-step cocycle of the odometer along the repeating block is generated
by the ratios ``w_j(c+1) / w_j(c)``.  These are exact rationals, so the group
they generate is read off from integer exponent vectors over the primes that
occur: rank 0 is trivial, rank 1 is cyclic, anything else is not.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from sympy import Matrix

from finitary_oe.cylinder import ClopenSet, CylinderError, LevelSpec, Measure, Word
from finitary_oe.exact import (
    exp_bracket,
    exponent_vector,
    flog,
    fmt,
    log_outside,
    log_within,
    nearest_power,
    power_of,
)
from finitary_oe.odometer import OdometerSystem, rn_derivative, shift

__all__ = [
    "RatioLattice",
    "Witness",
    "TypeLabel",
    "SpecialMeasureTranscript",
    "Stage",
    "GapNotWitnessed",
    "StageFailed",
    "ratio_lattice",
    "lattice_of",
    "classify",
    "check_special",
    "find_clopen_gap",
    "gap_audit",
    "special_measure",
    "mp_subrelation_ergodic",
    "example_1_6",
    "example_1_6_system",
]

MEASURE_PRESERVING = "MeasurePreserving"
TYPE_III_LAMBDA = "TypeIIILambda"
TYPE_III_1 = "TypeIII1Candidate"
UNKNOWN = "Unknown"


class GapNotWitnessed(CylinderError):
    pass


class StageFailed(CylinderError):
    pass


@dataclass(frozen=True)
class RatioLattice:
    primes: tuple
    ratios: tuple  # distinct one-step ratios != 1
    vectors: tuple  # exponent vectors aligned with ``primes``
    rank: int
    kind: str  # trivial | cyclic | non-cyclic
    lam: Fraction | None = None

    def contains(self, q: Fraction) -> bool:
        """Exact membership of ``q`` in the generated group (cyclic or trivial only)."""
        if self.kind == "trivial":
            return q == 1
        if self.kind == "cyclic":
            return power_of(q, self.lam) is not None
        raise ValueError("membership is only decided for cyclic groups")

    def to_json(self) -> dict:
        return {
            "primes": list(self.primes),
            "ratios": [fmt(r) for r in self.ratios],
            "vectors": [list(v) for v in self.vectors],
            "rank": self.rank,
            "generated_group": self.kind,
            "lambda": None if self.lam is None else fmt(self.lam),
        }


def lattice_of(ratios: Sequence[Fraction]) -> RatioLattice:
    """Classify the multiplicative group generated by positive rationals."""
    rs = sorted({Fraction(r) for r in ratios if r != 1})
    vecs = [exponent_vector(r) for r in rs]
    primes = tuple(sorted({p for v in vecs for p in v}))
    rows = tuple(tuple(v.get(p, 0) for p in primes) for v in vecs)
    if not rows:
        return RatioLattice((), (), (), 0, "trivial", None)
    rank = Matrix(rows).rank()
    if rank >= 2:
        return RatioLattice(primes, tuple(rs), rows, rank, "non-cyclic", None)
    base = next(r for r in rows if any(r))
    g0 = math.gcd(*base)
    prim = tuple(x // g0 for x in base)
    k = next(i for i, x in enumerate(prim) if x)
    g = 0
    for r in rows:
        g = math.gcd(g, r[k] // prim[k])
    gen = Fraction(1)
    for p, e in zip(primes, prim):
        gen *= Fraction(p) ** (e * g)
    lam = gen if gen < 1 else 1 / gen
    return RatioLattice(primes, tuple(rs), rows, 1, "cyclic", lam)


def _tail_start(sys: OdometerSystem) -> int:
    return max(sys.levels.tail_start, sys.measure.density_depth)


def _tail_ratios(sys: OdometerSystem) -> list:
    """``(level, digit, ratio)`` for one period of block levels past the prefix and density."""
    j0 = _tail_start(sys)
    out = []
    for j in range(j0, j0 + sys.levels.period):
        ws = sys.measure.level_weights(j)
        for c in range(len(ws) - 1):
            out.append((j, c, ws[c + 1] / ws[c]))
    return out


def ratio_lattice(sys: OdometerSystem) -> RatioLattice:
    return lattice_of([r for _, _, r in _tail_ratios(sys)])


@dataclass(frozen=True)
class Witness:
    """``T**power`` maps ``[word]`` onto ``[image]`` with constant cocycle ``ratio``.

    ``recurrence`` is the same pattern one block period deeper, which carries
    the same ratio; together they show the value recurs along the tail.
    """

    word: Word
    image: Word
    power: int
    ratio: Fraction
    recurrence: Word
    recurrence_power: int

    def replay(self, sys: OdometerSystem) -> bool:
        a = rn_derivative(sys, self.word, self.power)
        b = rn_derivative(sys, self.recurrence, self.recurrence_power)
        return a.image == self.image and a.word == self.word and a.ratio == self.ratio and b.ratio == self.ratio

    def pair(self, levels: LevelSpec) -> tuple:
        return ClopenSet.of(levels, self.word), ClopenSet.of(levels, self.image)

    def to_json(self) -> dict:
        return {
            "source": list(self.word),
            "target": list(self.image),
            "power": self.power,
            "ratio": fmt(self.ratio),
            "recurrence": list(self.recurrence),
            "recurrence_power": self.recurrence_power,
        }


def _witness_at(sys: OdometerSystem, j: int, c: int) -> Witness:
    lv = sys.levels
    u = (0,) * j + (c,)
    power = lv.radix(j)
    ratio = sys.measure.cylinder(shift(lv, u, power)) / sys.measure.cylinder(u)
    jj = j + lv.period
    v = (0,) * jj + (c,)
    return Witness(u, shift(lv, u, power), power, ratio, v, lv.radix(jj))


def witness_for(sys: OdometerSystem, target: Fraction) -> Witness | None:
    """A tail witness whose ratio is exactly ``target`` (or its inverse, reversed)."""
    target = Fraction(target)
    for j, c, r in _tail_ratios(sys):
        if r == target:
            return _witness_at(sys, j, c)
    for j, c, r in _tail_ratios(sys):
        if r == 1 / target:
            w = _witness_at(sys, j, c)
            # run the same pattern backwards
            jj = j + sys.levels.period
            back = (0,) * jj + (c + 1,)
            return Witness(w.image, w.word, -w.power, target, back, -sys.levels.radix(jj))
    return None


@dataclass(frozen=True)
class TypeLabel:
    kind: str
    lam: Fraction | None = None
    witnesses: tuple = field(default=(), compare=False)

    def to_json(self) -> dict:
        return {
            "type": self.kind,
            "lambda": None if self.lam is None else fmt(self.lam),
            "witnesses": [w.to_json() for w in self.witnesses],
        }

    def __str__(self):
        return f"{self.kind}({fmt(self.lam)})" if self.lam is not None else self.kind


def classify(sys: OdometerSystem) -> TypeLabel:
    lat = ratio_lattice(sys)
    if lat.kind == "trivial":
        return TypeLabel(MEASURE_PRESERVING)
    seen: dict = {}
    for j, c, r in _tail_ratios(sys):
        seen.setdefault(r, (j, c))
    wits = [_witness_at(sys, j, c) for r, (j, c) in sorted(seen.items())]
    wits = [w for w in wits if w.replay(sys)]
    if lat.kind == "cyclic":
        got = lattice_of([w.ratio for w in wits])
        if got.kind == "cyclic" and got.lam == lat.lam:
            return TypeLabel(TYPE_III_LAMBDA, lat.lam, tuple(wits))
        return TypeLabel(UNKNOWN, None, tuple(wits))
    # two witnesses with independent exponent vectors
    for a in range(len(wits)):
        for b in range(a + 1, len(wits)):
            if lattice_of([wits[a].ratio, wits[b].ratio]).rank == 2:
                return TypeLabel(TYPE_III_1, None, (wits[a], wits[b]))
    return TypeLabel(UNKNOWN, None, tuple(wits))


def _working_depth(sys: OdometerSystem) -> int:
    return max(sys.levels.tail_start, sys.measure.density_depth)


def check_special(sys: OdometerSystem, lam: Fraction | None = None) -> tuple:
    """Exact test that every one-step value is an integer power of ``lam``.

    Checks all transitions inside the working depth, the carry through the
    working depth and one period of tail ratios.  Returns ``(ok, violations)``
    with violations as ``(word, ratio)``.
    """
    if lam is None:
        lat = ratio_lattice(sys)
        if lat.kind == "non-cyclic":
            return False, [((), r) for r in lat.ratios]
        lam = lat.lam
    lam = None if lam is None else Fraction(lam)

    def ok(q):
        return q == 1 if lam is None else power_of(q, lam) is not None

    lv = sys.levels
    W = _working_depth(sys) + lv.period
    ms = sys.measure.cylinder_measures(W)
    bad = []
    for i in range(len(ms) - 1):
        q = ms[i + 1] / ms[i]
        if not ok(q):
            bad.append((lv.word(i, W), q))
    carry = ms[0] / ms[-1]
    if not ok(carry):
        bad.append((lv.word(len(ms) - 1, W), carry))
    for j, c, r in _tail_ratios(sys):
        if not ok(r):
            bad.append(((0,) * j + (c,), r))
    return not bad, bad


# -- clopen gaps ----------------------------------------------------------------------


def _coset_avoids(q: Fraction, lam: Fraction | None, lo: Fraction, hi: Fraction, a, b) -> bool:
    """Every ``q * lam**n`` lies outside ``[e**a, e**b]`` (certified)."""
    if lam is None:
        return log_outside(q, a, b)
    la = flog(lam)
    # only the powers near the interval can land inside it
    n_lo = math.floor((float(b) - flog(q)) / la) - 2
    n_hi = math.ceil((float(a) - flog(q)) / la) + 2
    for n in range(min(n_lo, n_hi), max(n_lo, n_hi) + 1):
        if not log_outside(q * lam**n, a, b):
            return False
    return True


def _values_on(sys: OdometerSystem, a: ClopenSet, d: int) -> set:
    ms = sys.measure.cylinder_measures(d)
    cells = sorted({ms[i] for i in a.cells(d)})
    return {v / u for u in cells for v in cells}


def find_clopen_gap(sys: OdometerSystem, a, b, max_depth: int = 10) -> ClopenSet:
    """Clopen set on which no cocycle value lies in ``[e**a, e**b]``.

    Walks down ``X ⊃ [0] ⊃ [0,0] ⊃ ...`` and returns the first set whose
    value cosets (depth-``W`` measure ratios times the tail group) avoid the
    interval.  Needs a cyclic or trivial tail group.
    """
    a, b = Fraction(a), Fraction(b)
    if a > b:
        a, b = b, a
    if a <= 0 <= b:
        raise GapNotWitnessed("the interval contains 0 = log 1, which is always a value")
    lat = ratio_lattice(sys)
    if lat.kind == "non-cyclic":
        raise GapNotWitnessed("tail group is not cyclic; no gap can be certified at finite depth")
    lam = lat.lam
    lv = sys.levels
    W = _working_depth(sys)
    if W > max_depth:
        raise GapNotWitnessed(f"working depth {W} exceeds {max_depth}")
    if not _coset_avoids(Fraction(1), lam, None, None, a, b):
        raise GapNotWitnessed("the tail group meets the interval")
    for k in range(W + 1):
        cand = ClopenSet.of(lv, (0,) * k)
        vals = _values_on(sys, cand, W)
        if all(_coset_avoids(q, lam, None, None, a, b) for q in vals):
            return cand
    raise GapNotWitnessed("no cylinder on the descending walk avoids the interval")


def gap_audit(sys: OdometerSystem, a_set: ClopenSet, a, b, depth: int) -> list:
    """Brute-force audit: cocycle values on ``a_set`` at ``depth`` that fall in ``[e**a, e**b]``."""
    vals = _values_on(sys, a_set, max(depth, a_set.depth, _working_depth(sys)))
    return sorted(q for q in vals if not log_outside(q, Fraction(a), Fraction(b)))


# -- special measures -----------------------------------------------------------------


@dataclass(frozen=True)
class Stage:
    eta: Fraction
    bound: Fraction  # 3 * eta
    k: int  # A0 = [0^k]
    density: dict  # depth-W word -> phi
    max_log_deviation: float
    within_bound: bool
    snap: bool = False

    def to_json(self) -> dict:
        return {
            "eta": fmt(self.eta),
            "bound": fmt(self.bound),
            "A0": [0] * self.k,
            "density": {".".join(map(str, w)) or "-": fmt(v) for w, v in sorted(self.density.items())},
            "max_log_deviation": self.max_log_deviation,
            "within_bound": self.within_bound,
            "snap": self.snap,
        }


@dataclass(frozen=True)
class SpecialMeasureTranscript:
    lam: Fraction
    etas: tuple
    stages: tuple
    final_measure: Measure
    residual_bound: Fraction
    working_depth: int

    def to_json(self) -> dict:
        return {
            "lambda": fmt(self.lam),
            "etas": [fmt(e) for e in self.etas],
            "working_depth": self.working_depth,
            "stages": [s.to_json() for s in self.stages],
            "residual_bound": fmt(self.residual_bound),
        }


def _within_lambda(q: Fraction, lam: Fraction, eta: Fraction) -> bool:
    return log_within(q, lam ** nearest_power(q, lam), eta)


def _stage(sys: OdometerSystem, lam: Fraction, W: int, eta: Fraction | None) -> tuple:
    """Pick ``A0 = [0^k]`` and the density that puts every value within ``eta`` of ``lam^Z``.

    ``eta=None`` asks for exact powers (the snap).
    """
    lv = sys.levels
    ms = sys.measure.cylinder_measures(W)
    for k in range(W + 1):
        a0 = [ms[i] for i in range(len(ms)) if i % lv.radix(k) == 0]
        good = True
        for u in a0:
            for v in a0:
                q = v / u
                if eta is None:
                    good = power_of(q, lam) is not None
                else:
                    good = _within_lambda(q, lam, eta)
                if not good:
                    break
            if not good:
                break
        if good:
            break
    else:  # pragma: no cover - k = W always succeeds
        raise StageFailed("no A0 found")
    mk = lv.radix(k)
    phi = {}
    for j in range(len(ms)):
        c = j % mk
        if c == 0:
            continue
        q = ms[j] / ms[j - c]
        n = nearest_power(q, lam)
        f = lam**n / q
        if f != 1:
            phi[lv.word(j, W)] = f
    return k, phi


def special_measure(sys: OdometerSystem, etas: Sequence, stages: int | None = None) -> SpecialMeasureTranscript:
    """Equivalent measure whose cocycle takes values in ``lam^Z``.

    Each stage chooses ``A0 = [0^k]`` with ``k`` minimal such that values on
    ``A0 x A0`` are within ``eta_i`` of ``lam^Z``, then moves every depth-W
    cell onto its ``A0`` representative with a density correcting the ratio
    to the nearest power.  A final exact stage snaps what is left.
    """
    lat = ratio_lattice(sys)
    if lat.kind != "cyclic":
        raise StageFailed(f"tail group is {lat.kind}; a special measure needs a cyclic one")
    lam = lat.lam
    etas = tuple(Fraction(e) for e in etas)
    if stages is not None:
        etas = etas[:stages]
    if any(e <= 0 for e in etas) or any(etas[i + 1] > etas[i] for i in range(len(etas) - 1)):
        raise StageFailed("etas must be positive and non-increasing")
    W = _working_depth(sys)
    cur = sys
    out = []
    for eta in etas:
        k, phi = _stage(cur, lam, W, eta)
        dev = max((abs(flog(f)) for f in phi.values()), default=0.0)
        ok = all(log_within(f, Fraction(1), 3 * eta) for f in phi.values())
        out.append(Stage(eta, 3 * eta, k, phi, dev, ok))
        if phi:
            cur = cur.with_measure(cur.measure.times_density(phi))
    residual = 3 * etas[-1] if etas else Fraction(0)
    k, phi = _stage(cur, lam, W, None)
    dev = max((abs(flog(f)) for f in phi.values()), default=0.0)
    if phi:
        ok = all(log_within(f, Fraction(1), residual) for f in phi.values()) if residual else False
        cur = cur.with_measure(cur.measure.times_density(phi))
    else:
        ok = True
        if all(not s.density for s in out):
            residual = Fraction(0)
    out.append(Stage(Fraction(0), residual, k, phi, dev, ok, snap=True))
    good, bad = check_special(cur, lam)
    if not good:
        raise StageFailed(f"snap did not produce a special measure: {bad[:3]}")
    return SpecialMeasureTranscript(lam, etas, tuple(out), cur.measure, residual, W)


# -- ergodicity of the measure-preserving subrelation ---------------------------------


class _DSU:
    def __init__(self, n):
        self.p = list(range(n))

    def find(self, x):
        while self.p[x] != x:
            self.p[x] = self.p[self.p[x]]
            x = self.p[x]
        return x

    def union(self, a, b):
        a, b = self.find(a), self.find(b)
        if a == b:
            return False
        if b < a:
            a, b = b, a
        self.p[b] = a
        return True


def mp_subrelation_ergodic(sys: OdometerSystem, depth: int, periods: int = 3, lam: Fraction | None = None) -> dict:
    """Communication graph of depth-``depth`` cylinders under ratio-1 groupoid pieces.

    Cylinders ``u`` and ``v`` are joined when extensions ``u e`` and ``v f``
    of equal length have exactly equal measure; ``T**(idx(vf) - idx(ue))``
    then maps one onto the other with cocycle 1.
    """
    ok, bad = check_special(sys, lam)
    if not ok:
        raise CylinderError(f"measure is not special: {bad[:3]}")
    lv = sys.levels
    m = sys.measure
    d = max(depth, _working_depth(sys))
    cells = lv.words(d)
    ms = m.cylinder_measures(d)
    dsu = _DSU(len(cells))
    edges = []
    for r in range(1, periods + 1):
        L = d + r * lv.period
        rel: dict = {}
        for e_idx in range(lv.radix(L) // lv.radix(d)):
            e = lv.word(e_idx * lv.radix(d), L)[d:]
            val = Fraction(1)
            for off, digit in enumerate(e):
                val *= m.weight(d + off, digit)
            rel.setdefault(val, e)
        owner: dict = {}
        for i, mu in enumerate(ms):
            for val, e in rel.items():
                key = mu * val
                if key in owner:
                    j, f = owner[key]
                    if dsu.union(i, j):
                        src = cells[j] + f
                        dst = cells[i] + e
                        edges.append((src, dst, lv.index(dst) - lv.index(src)))
                else:
                    owner[key] = (i, e)
    comps: dict = {}
    for i in range(len(cells)):
        comps.setdefault(dsu.find(i), []).append(cells[i])
    return {
        "depth": d,
        "cylinders": len(cells),
        "components": len(comps),
        "connected": len(comps) == 1,
        "component_sizes": sorted((len(c) for c in comps.values()), reverse=True),
        "witnesses": [{"source": list(s), "target": list(t), "power": k} for s, t, k in edges],
    }


# -- the meager induced set example ----------------------------------------------------


def _odd_weights(lam: Fraction) -> tuple:
    return (1 / (1 + lam), lam / (1 + lam))


def _even_weights(m: int, alpha: Fraction) -> tuple:
    # printed weights sum to 1 + 1/m; normalized per level
    raw = [1 / (m * (1 + alpha)), alpha / (m * (1 + alpha))] + [Fraction(1, m)] * m
    s = sum(raw)
    return tuple(x / s for x in raw)


def example_1_6_system(lam, alpha, even_levels: Sequence[int], depth_max: int = 32) -> tuple:
    """The odometer over ``{0,1} x {0..m+1} x ...`` and the odometer induced on ``A``.

    ``even_levels`` lists the even-level sizes ``m + 2`` (``m = n**2``); all
    but the last pair form the prefix and the last (odd, even) pair repeats.
    """
    lam, alpha = Fraction(lam), Fraction(alpha)
    if not (0 < lam < 1 and 0 < alpha < 1):
        raise ValueError("need 0 < lambda, alpha < 1")
    if not even_levels or any(s < 3 for s in even_levels):
        raise ValueError("even-level sizes must be >= 3")
    pw, ipw = [], []
    for s in even_levels[:-1]:
        pw += [_odd_weights(lam), _even_weights(s - 2, alpha)]
        ipw += [_odd_weights(lam), (Fraction(1, s - 2),) * (s - 2)]
    s = even_levels[-1]
    bw = [_odd_weights(lam), _even_weights(s - 2, alpha)]
    ibw = [_odd_weights(lam), (Fraction(1, s - 2),) * (s - 2)]
    sys = OdometerSystem.from_weights(bw, pw, depth_max)
    induced = OdometerSystem.from_weights(ibw, ipw, depth_max)
    return sys, induced


def example_1_6(lam, alpha, even_levels: Sequence[int]) -> dict:
    lam, alpha = Fraction(lam), Fraction(alpha)
    sys, induced = example_1_6_system(lam, alpha, even_levels)
    w_lam = witness_for(sys, lam)
    w_alpha = witness_for(sys, alpha)
    exact = ratio_lattice(sys)
    witnessed = lattice_of([lam, alpha])
    ind_label = classify(induced)
    obstruction = power_of(alpha, lam) is None
    mass = Fraction(1)
    for j in range(sys.levels.tail_start):
        if j % 2 == 1:
            mass *= sum(sys.measure.level_weights(j)[2:])
    return {
        "lambda": fmt(lam),
        "alpha": fmt(alpha),
        "levels": {"prefix": list(sys.levels.prefix), "block": list(sys.levels.block)},
        "normalized": True,
        "witnesses": {
            "lambda": None if w_lam is None else w_lam.to_json(),
            "alpha": None if w_alpha is None else w_alpha.to_json(),
            "replayed": bool(w_lam and w_alpha and w_lam.replay(sys) and w_alpha.replay(sys)),
        },
        "induced": {
            "levels": {"prefix": list(induced.levels.prefix), "block": list(induced.levels.block)},
            "classification": ind_label.to_json(),
            "prefix_mass_of_A": fmt(mass),
        },
        "witnessed_lattice": witnessed.to_json(),
        "exact_value_group": exact.to_json(),
        "original_classification": classify(sys).to_json(),
        "alpha_power_of_lambda": not obstruction,
        "verdict": (
            "T and T_A not almost continuously orbit equivalent"
            if obstruction
            else "no obstruction: alpha is an integer power of lambda"
        ),
    }
