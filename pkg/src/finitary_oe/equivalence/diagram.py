"""The back-and-forth diagram between two odometer systems.

Levels alternate between a *leader* and a *follower* side (side ``a`` leads
odd levels).  The leader refines its uniform relation by a cylinder castle:
the digits ``[lo, hi)`` of its own odometer, i.e. the aligned Rokhlin tower
of the induced map on ``[0^lo]``, whose fiber ratios are constant.  The
follower copies that castle into its current fundamental set one leader
digit at a time, each digit by a tuple exhaustion with the digit's ratios.

Both sides work in the digits at and above a fixed offset ``H_s`` (the top
of that side's castles).  There the measure factors,
``mu([w] x Q) = mu([w]) * mu_high(Q)`` for ``len(w) == H_s``, so follower
maps are groupoid maps of the shifted system and lift to ``T**(k * M_H)``.

The atom with index ``z = (i_1, ..., i_N)`` is
``[castle word] x X_mid x F_z`` on each side, where ``F_z`` is the image of
the final fundamental set under the digit maps selected by the other
side's castle indices.  ``psi`` sends atom ``z`` of ``a`` to atom ``z`` of
``b``.  A castle move ``w -> w + 1`` on one side is realised on the other by
the digit maps of the changed digits; the realisation only depends on the
carry pattern ``(max, ..., max, c)``, which is what the tables record.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

from finitary_oe.config import dump_system, format_word
from finitary_oe.cylinder import ClopenSet, CylinderError, prefix_distance_depth
from finitary_oe.equivalence.maps import tuple_exhaustion
from finitary_oe.exact import dual, fmt, log_within
from finitary_oe.krieger import MEASURE_PRESERVING, TYPE_III_1, TYPE_III_LAMBDA, check_special, classify
from finitary_oe.odometer import GroupoidMap, OdometerSystem, shift

__all__ = [
    "ARTIFACT_VERSION",
    "DiagramError",
    "TypeMismatch",
    "Step",
    "Side",
    "FinitaryOE",
    "default_eps",
    "plan_castles",
    "build_diagram",
]

ARTIFACT_VERSION = 1
SIDES = ("a", "b")


class DiagramError(CylinderError):
    pass


class TypeMismatch(DiagramError):
    pass


def default_eps(depth: int) -> list:
    return [Fraction(1, 2 ** (n + 1)) for n in range(1, depth + 1)]


def leader_of(n: int) -> str:
    return "a" if n % 2 == 1 else "b"


def other(s: str) -> str:
    return "b" if s == "a" else "a"


@dataclass
class Step:
    """Copy of one leader digit: ``maps[c]`` sends ``base`` onto fiber ``c`` inside ``pool``."""

    level: int
    rhos: list
    pool: ClopenSet
    base: ClopenSet
    maps: list
    loss: Fraction


@dataclass
class Side:
    name: str
    sys: OdometerSystem
    blocks: list  # (level, lo, hi), contiguous from 0
    H: int
    high: OdometerSystem
    steps: list = field(default_factory=list)

    @property
    def top(self) -> int:
        return self.blocks[-1][2] if self.blocks else 0

    def block_at(self, n):
        for blk in self.blocks:
            if blk[0] == n:
                return blk
        return None

    def steps_upto(self, n: int) -> list:
        return [st for st in self.steps if st.level <= n]

    def castle_digits(self, n: int) -> list:
        """Digit words of the level-``n`` castle block, by position ``i``."""
        cache = self.__dict__.setdefault("_digits", {})
        if n not in cache:
            lv = self.sys.levels
            _, lo, hi = self.block_at(n)
            cache[n] = [lv.word(i * lv.radix(lo), hi)[lo:] for i in range(lv.radix(hi) // lv.radix(lo))]
        return cache[n]


def plan_castles(sys: OdometerSystem, levels: Sequence[int], eps: Sequence[Fraction]) -> list:
    """Contiguous digit blocks ``[lo, hi)`` for the leader levels of one side.

    ``hi`` is at least the depth fixing the ``eps_n`` prefix distance and is
    raised until the top castle floor ``[max^hi]`` has measure below ``eps_n``.
    """
    lv, m = sys.levels, sys.measure
    out = []
    lo = 0
    for n in levels:
        e = eps[n - 1]
        hi = max(prefix_distance_depth(e), lo + 1)
        while hi <= lv.depth_max and m.cylinder(tuple(lv.size(j) - 1 for j in range(hi))) >= e:
            hi += 1
        if hi > lv.depth_max:
            raise DiagramError(f"castle for level {n} needs depth {hi} > depth_max")
        out.append((n, lo, hi))
        lo = hi
    return out


def digit_ratios(sys: OdometerSystem, j: int) -> list:
    ws = sys.measure.level_weights(j)
    return [w / ws[0] for w in ws]


def classify_pair(sa: OdometerSystem, sb: OdometerSystem, mode: str | None):
    """``(mode, lam)`` for the pair, or :class:`TypeMismatch`."""
    ta, tb = classify(sa), classify(sb)
    if ta.kind != tb.kind or (ta.kind == TYPE_III_LAMBDA and ta.lam != tb.lam):
        raise TypeMismatch(f"types differ: {ta.kind}({ta.lam}) vs {tb.kind}({tb.lam})")
    if mode is None:
        mode = {TYPE_III_LAMBDA: "lambda", MEASURE_PRESERVING: "lambda", TYPE_III_1: "III1"}.get(ta.kind)
    if mode == "lambda":
        if ta.kind not in (TYPE_III_LAMBDA, MEASURE_PRESERVING):
            raise TypeMismatch(f"lambda mode needs type III_lambda, got {ta.kind}")
        if ta.lam is not None:
            for name, s in (("a", sa), ("b", sb)):
                if not check_special(s, ta.lam)[0]:
                    raise DiagramError(f"measure on side {name} is not special; run special-measure first")
        return mode, ta.lam
    if mode == "III1":
        if ta.kind != TYPE_III_1:
            raise TypeMismatch(f"III1 mode needs type III_1 candidates, got {ta.kind}")
        return mode, None
    raise TypeMismatch(f"no diagram mode for type {ta.kind}")


def make_side(name: str, sys: OdometerSystem, depth: int, eps: Sequence[Fraction]) -> Side:
    lvls = [n for n in range(1, depth + 1) if leader_of(n) == name]
    blocks = plan_castles(sys, lvls, eps)
    dd = sys.measure.density_depth
    if dd > 0:
        raise DiagramError(f"side {name}: density reaches depth {dd}; castle ratios would not factor by digit")
    H = blocks[-1][2] if blocks else 0
    high = OdometerSystem(sys.levels.shifted(H), sys.measure.shifted(H))
    return Side(name, sys, blocks, H, high)


# -- derived quantities -------------------------------------------------------------


def _product(rs):
    out = [()]
    for r in rs:
        out = [z + (i,) for z in out for i in range(r)]
    return out


def fiber_masses(side: Side, steps: list, mode: str) -> dict:
    """``{digits: mu_high(F)}`` with ``F = S_0[c_0] o ... o S_k[c_k] (base_k)``.

    In lambda mode every piece has the exact prescribed ratio, so the mass is
    a product.  Otherwise each base cell is pushed through the maps.
    """
    hm = side.high.measure
    if not steps:
        return {(): Fraction(1)}
    base = steps[-1].base
    if mode == "lambda":
        out = {(): hm.measure_of(base)}
        for st in reversed(steps):
            out = {(c,) + k: v * st.rhos[c] for k, v in out.items() for c in range(len(st.maps))}
        return out
    lv = side.high.levels
    cur = {(): list(base.words)}
    for st in reversed(steps):
        nxt = {}
        for k, cells in cur.items():
            for c, g in enumerate(st.maps):
                nxt[(c,) + k] = [_push(g, lv, x) for x in cells]
        cur = nxt
    return {k: sum((hm.cylinder(x) for x in cells), Fraction(0)) for k, cells in cur.items()}


def _push(g: GroupoidMap, lv, x):
    k = g.power_at(x)
    if k is None:
        raise DiagramError(f"cell {x} is not inside one piece")
    return shift(lv, x, k)


def z_digits(sides: dict, z: Sequence[int], s: str) -> tuple:
    """``(own castle digits, digits selecting the follower maps)`` of side ``s`` for ``z``."""
    own: tuple = ()
    foll: tuple = ()
    for n, i in enumerate(z, start=1):
        L = sides[leader_of(n)]
        d = L.castle_digits(n)[i]
        if L.name == s:
            own += d
        else:
            foll += d
    return own, foll


def z_ranges(sides: dict, n: int) -> list:
    out = []
    for k in range(1, n + 1):
        L = sides[leader_of(k)]
        _, lo, hi = L.block_at(k)
        out.append(L.sys.levels.radix(hi) // L.sys.levels.radix(lo))
    return out


def eta(sides: dict, z: Sequence[int]) -> Fraction:
    """Reference measure on ``Z_n``: product of leader castle proportions."""
    out = Fraction(1)
    for n, i in enumerate(z, start=1):
        L = sides[leader_of(n)]
        lv, m = L.sys.levels, L.sys.measure
        _, lo, hi = L.block_at(n)
        out *= m.cylinder(lv.word(i * lv.radix(lo), hi)) / m.cylinder((0,) * lo)
    return out


def atom_masses(sides: dict, n: int, mode: str) -> dict:
    """``{z: (mu_a(A_z), mu_b(A'_z))}`` for the atoms after level ``n``."""
    fm = {s: fiber_masses(sides[s], sides[s].steps_upto(n), mode) for s in SIDES}
    cm = {s: {} for s in SIDES}
    out = {}
    for z in _product(z_ranges(sides, n)):
        pair = []
        for s in SIDES:
            own, foll = z_digits(sides, z, s)
            if own not in cm[s]:
                cm[s][own] = sides[s].sys.measure.cylinder(own)
            pair.append(cm[s][own] * fm[s][foll])
        out[z] = tuple(pair)
    return out


def coverage(sides: dict, n: int, mode: str) -> dict:
    return {s: sum(fiber_masses(sides[s], sides[s].steps_upto(n), mode).values(), Fraction(0)) for s in SIDES}


def step_deviation(side: Side, st: Step) -> Fraction:
    """Largest ``max(q / rho, rho / q)`` over the pieces of a step (1 when every ratio is exact)."""
    hm = side.high.measure
    lv = side.high.levels
    worst = Fraction(1)
    for c, g in enumerate(st.maps):
        for w, k in g.pieces:
            q = hm.cylinder(shift(lv, w, k)) / hm.cylinder(w)
            worst = max(worst, q / st.rhos[c], st.rhos[c] / q)
    return worst


def _compose_chain(maps: list) -> GroupoidMap:
    """``maps[0] o maps[1] o ...``."""
    g = maps[-1]
    for f in reversed(maps[:-1]):
        g = f.compose(g)
    return g


def move_table(mover: Side, follower: Side) -> list:
    """Realisation on ``follower`` of every castle move of ``mover``.

    The move at carry pattern ``(max^p, c)`` (digit ``p`` goes ``c -> c+1``,
    lower digits wrap to 0) is ``U_to o U_from^{-1}`` with
    ``U = S_0[d_0] o ... o S_p[d_p]`` built from the follower's digit maps.
    Powers are given in units of the follower's full odometer.
    """
    lv = mover.sys.levels
    mult = follower.sys.levels.radix(follower.H)
    out = []
    for p in range(mover.top):
        for c in range(lv.size(p) - 1):
            src = [lv.size(j) - 1 for j in range(p)] + [c]
            dst = [0] * p + [c + 1]
            up_from = _compose_chain([follower.steps[j].maps[d] for j, d in enumerate(src)])
            up_to = _compose_chain([follower.steps[j].maps[d] for j, d in enumerate(dst)])
            g = up_to.compose(up_from.invert())
            out.append({"cylinder": tuple(src), "pieces": [(w, k * mult) for w, k in g.pieces]})
    return out


def a_n_checks(sides: dict, depth: int, eps: Sequence[Fraction], mode: str) -> list:
    """Per side and level: ``|log(a_{n+1}(z, i) / a_n(z))| <= 2 eps_n + slack_n``.

    ``a_n(z) = mu_s(A_z) / eta(z)``; ``slack_n`` bounds ``-log`` of the
    fraction of side ``s`` kept by the follower step at level ``n + 1``.
    """
    masses = {n: atom_masses(sides, n, mode) for n in range(1, depth + 1)}
    cov = {n: coverage(sides, n, mode) for n in range(1, depth + 1)}
    etas = {n: {z: eta(sides, z) for z in masses[n]} for n in masses}
    out = []
    for n in range(1, depth):
        for si, s in enumerate(SIDES):
            keep = cov[n + 1][s] / cov[n][s]
            slack = (1 - keep) / keep
            bound = 2 * eps[n - 1] + slack
            worst = Fraction(1)
            ok = True
            for z, pair in masses[n + 1].items():
                q = (pair[si] / etas[n + 1][z]) / (masses[n][z[:-1]][si] / etas[n][z[:-1]])
                if not log_within(q, 1, bound):
                    ok = False
                worst = max(worst, q, 1 / q)
            out.append({"level": n, "side": s, "bound": bound, "worst_ratio": worst, "ok": ok})
    return out


def castle_checks(sides: dict, eps: Sequence[Fraction], cov: dict) -> list:
    """Triangle: atoms fix every digit the ``eps_n`` prefix distance sees.  Diamond: ``mu(O_n)`` is large."""
    out = []
    for s in SIDES:
        sd = sides[s]
        lv, m = sd.sys.levels, sd.sys.measure
        for n, lo, hi in sd.blocks:
            e = eps[n - 1]
            top = m.cylinder(tuple(lv.size(j) - 1 for j in range(hi)))
            c = cov[n][s]
            mu_o = (1 - top) * c
            out.append(
                {
                    "level": n,
                    "side": s,
                    "hi": hi,
                    "triangle": hi >= prefix_distance_depth(e),
                    "mu_O": mu_o,
                    "diamond": mu_o > 1 - 2 * e - (1 - c),
                }
            )
    return out


@dataclass
class FinitaryOE:
    mode: str
    lam: Fraction | None
    eps: list
    tol: Fraction
    depth: int
    sides: dict
    atoms: dict  # z -> (mu_a, mu_b)
    tables: dict  # "n": a-moves realised on b, "m": b-moves realised on a
    budgets: dict
    checks: dict
    timings: dict

    def to_json(self) -> dict:
        return artifact_json(self)


def budgets(sides: dict, atoms: dict, depth: int, mode: str, eps) -> dict:
    cov = coverage(sides, depth, mode)
    defect = {s: 1 - cov[s] for s in SIDES}
    total = defect["a"] + defect["b"]
    if mode != "lambda":
        # worst multiplicative bend of an atom's mass by the digit maps of both sides
        bend = Fraction(1)
        for s in SIDES:
            for st in sides[s].steps:
                bend *= step_deviation(sides[s], st)
        total += (bend - 1) * max(cov.values())
    per_level = [{"level": st.level, "side": s, "loss": st.loss} for s in SIDES for st in sides[s].steps]
    per_level.sort(key=lambda d: (d["level"], d["side"]))
    disc = sum((abs(x - y) for x, y in atoms.values()), Fraction(0))
    return {
        "coverage": cov,
        "defect": defect,
        "total": total,
        "discrepancy": disc,
        "ratio": cov["b"] / cov["a"],
        "ratio_budget": total / cov["a"],
        "per_level": per_level,
    }


def derive(sides: dict, depth: int, eps: list, mode: str) -> tuple:
    """Atoms, tables, budgets and checks from the sides alone (shared with the verifier)."""
    atoms = atom_masses(sides, depth, mode)
    tables = {"n": move_table(sides["a"], sides["b"]), "m": move_table(sides["b"], sides["a"])}
    b = budgets(sides, atoms, depth, mode, eps)
    cov = {n: coverage(sides, n, mode) for n in range(1, depth + 1)}
    checks = {"castle": castle_checks(sides, eps, cov)}
    if mode != "lambda":
        checks["a_n"] = a_n_checks(sides, depth, eps, mode)
    return atoms, tables, b, checks


def build_diagram(
    sys_a: OdometerSystem,
    sys_b: OdometerSystem,
    depth: int = 4,
    eps: Sequence[Fraction] | None = None,
    tol: Fraction = Fraction(1, 4096),
    mode: str | None = None,
) -> FinitaryOE:
    """Build the diagram to ``depth`` levels with the induced ``psi`` and orbit-cocycle tables."""
    t0 = time.perf_counter()
    if depth < 0:
        raise DiagramError("depth must be non-negative")
    eps = [Fraction(e) for e in (eps or default_eps(depth))][:depth]
    if len(eps) < depth or any(e <= 0 for e in eps):
        raise DiagramError("need one positive eps per level")
    tol = Fraction(tol)
    mode, lam = classify_pair(sys_a, sys_b, mode)
    sides = {"a": make_side("a", sys_a, depth, eps), "b": make_side("b", sys_b, depth, eps)}
    pools = {s: ClopenSet.full(sides[s].high.levels) for s in SIDES}
    for n in range(1, depth + 1):
        L = sides[leader_of(n)]
        F = sides[other(L.name)]
        _, lo, hi = L.block_at(n)
        for j in range(lo, hi):
            rhos = digit_ratios(L.sys, j)
            e = None if mode == "lambda" else eps[n - 1] / (hi - lo)
            pool = pools[F.name]
            res = tuple_exhaustion(F.high, pool, rhos, eps=e, tol=tol)
            lv = F.high.levels
            base = ClopenSet(lv, res.base)
            maps = [GroupoidMap(lv, p, base, pool) for p in res.pieces]
            F.steps.append(Step(n, rhos, pool, base, maps, res.leftover_measure))
            pools[F.name] = base
    t1 = time.perf_counter()
    if depth == 0:
        zero = {x: Fraction(0) for x in SIDES}
        b = {"coverage": zero, "defect": dict(zero), "total": Fraction(0), "discrepancy": Fraction(0),
             "ratio": Fraction(1), "ratio_budget": Fraction(0), "per_level": []}
        return FinitaryOE(mode, lam, [], tol, 0, sides, {}, {"n": [], "m": []}, b, {"castle": []}, {"levels": 0.0, "derive": 0.0})
    atoms, tables, b, checks = derive(sides, depth, eps, mode)
    oe = FinitaryOE(mode, lam, eps, tol, depth, sides, atoms, tables, b, checks, {})
    oe.timings = {"levels": t1 - t0, "derive": time.perf_counter() - t1}
    return oe


# -- artifact -------------------------------------------------------------------------


def _words(s: ClopenSet) -> list:
    return [format_word(w) for w in s.sorted()]


def artifact_json(oe: FinitaryOE) -> dict:
    """JSON-ready dict; exact values as ``p/q`` strings.  Serialise with ``sort_keys``."""
    sides = {}
    for s in SIDES:
        sd = oe.sides[s]
        sides[s] = {
            "system": dump_system(sd.sys),
            "H": sd.H,
            "blocks": [list(b) for b in sd.blocks],
            "steps": [
                {
                    "level": st.level,
                    "rhos": [fmt(x) for x in st.rhos],
                    "base": _words(st.base),
                    "maps": [[[format_word(w), k] for w, k in g.pieces] for g in st.maps],
                    "loss": fmt(st.loss),
                }
                for st in sd.steps
            ],
        }
    b = oe.budgets
    return {
        "version": ARTIFACT_VERSION,
        "mode": oe.mode,
        "lambda": None if oe.lam is None else fmt(oe.lam),
        "eps": [fmt(e) for e in oe.eps],
        "tol": fmt(oe.tol),
        "depth": oe.depth,
        "sides": sides,
        "atoms": [
            [list(z), format_word(z_digits(oe.sides, z, "a")[0]), format_word(z_digits(oe.sides, z, "b")[0]), fmt(x), fmt(y)]
            for z, (x, y) in sorted(oe.atoms.items())
        ],
        "tables": {
            k: [{"cylinder": format_word(e["cylinder"]), "pieces": [[format_word(w), p] for w, p in e["pieces"]]} for e in v]
            for k, v in oe.tables.items()
        },
        "budgets": {
            "coverage": {s: dual(v) for s, v in b["coverage"].items()},
            "defect": {s: dual(v) for s, v in b["defect"].items()},
            "total": dual(b["total"]),
            "discrepancy": dual(b["discrepancy"]),
            "ratio": dual(b["ratio"]),
            "ratio_budget": dual(b["ratio_budget"]),
            "per_level": [{"level": d["level"], "side": d["side"], "loss": dual(d["loss"])} for d in b["per_level"]],
        },
    }
