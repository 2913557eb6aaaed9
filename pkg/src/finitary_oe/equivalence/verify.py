"""Independent replay of a diagram artifact.

:func:`verify_oe` reads only the JSON artifact: the two systems, the castle
blocks and the stored digit maps.  Everything else (atom masses, ``psi``
ratios, the orbit-cocycle tables, coverage and the III_1 ``a_n`` bounds) is
recomputed in exact arithmetic and compared with what the artifact claims.
"""

from __future__ import annotations

import copy
import json
from dataclasses import dataclass, field
from fractions import Fraction

from finitary_oe.config import load_system, parse_word
from finitary_oe.cylinder import ClopenSet, CylinderError, prefix_distance_depth
from finitary_oe.equivalence import diagram as dg
from finitary_oe.exact import dual, exp_bracket, fmt, parse_rational
from finitary_oe.odometer import GroupoidMap, OdometerSystem, shift

__all__ = ["VerificationReport", "verify_oe", "verify_file", "inject_fault", "load_artifact"]


@dataclass
class VerificationReport:
    checks: list = field(default_factory=list)  # (name, ok, detail)

    def add(self, name: str, ok: bool, detail=None) -> bool:
        self.checks.append((name, bool(ok), detail))
        return ok

    @property
    def ok(self) -> bool:
        return all(ok for _, ok, _ in self.checks)

    @property
    def failures(self) -> list:
        return [f"{name}: {detail}" for name, ok, detail in self.checks if not ok]

    def to_json(self) -> dict:
        return {
            "ok": self.ok,
            "checks": [{"name": n, "ok": ok, "detail": _plain(d)} for n, ok, d in self.checks],
            "failures": self.failures,
        }

    def dumps(self) -> str:
        return json.dumps(self.to_json(), sort_keys=True, indent=1)


def _plain(x):
    if isinstance(x, Fraction):
        return dual(x)
    if isinstance(x, dict):
        return {str(k): _plain(v) for k, v in x.items()}
    if isinstance(x, (list, tuple)):
        return [_plain(v) for v in x]
    return x


class ArtifactError(CylinderError):
    pass


def _rebuild(art: dict) -> dict:
    """Sides with their digit maps, validated as groupoid maps of the high systems."""
    depth = art["depth"]
    eps = [parse_rational(e) for e in art["eps"]]
    sides = {}
    for s in dg.SIDES:
        d = art["sides"][s]
        sys = load_system(d["system"])
        H = int(d["H"])
        if sys.measure.density_depth > H:
            raise ArtifactError(f"side {s}: density deeper than the offset H={H}")
        high = OdometerSystem(sys.levels.shifted(H), sys.measure.shifted(H))
        side = dg.Side(s, sys, [tuple(b) for b in d["blocks"]], H, high)
        lv = high.levels
        pool = ClopenSet.full(lv)
        for k, st in enumerate(d["steps"]):
            base = ClopenSet(lv, [parse_word(w) for w in st["base"]])
            try:
                maps = [GroupoidMap(lv, tuple((parse_word(w), int(p)) for w, p in pcs), base, pool) for pcs in st["maps"]]
            except CylinderError as e:
                raise ArtifactError(f"side {s} step {k}: {e}") from None
            rhos = [parse_rational(x) for x in st["rhos"]]
            side.steps.append(dg.Step(int(st["level"]), rhos, pool, base, maps, parse_rational(st["loss"])))
            pool = base
        sides[s] = side
    return {"depth": depth, "eps": eps, "sides": sides, "mode": art["mode"], "tol": parse_rational(art["tol"])}


def _check_plan(rep: VerificationReport, ctx: dict) -> None:
    sides, eps, depth = ctx["sides"], ctx["eps"], ctx["depth"]
    for s in dg.SIDES:
        sd = sides[s]
        lvls = [n for n in range(1, depth + 1) if dg.leader_of(n) == s]
        want = dg.plan_castles(sd.sys, lvls, eps)
        rep.add(f"castle plan {s}", list(want) == list(sd.blocks), {"stored": sd.blocks, "recomputed": want})
        rep.add(f"offset {s}", sd.H == (sd.blocks[-1][2] if sd.blocks else 0), sd.H)
        o = sides[dg.other(s)]
        digits = [j for n, lo, hi in o.blocks for j in range(lo, hi)]
        rep.add(f"digit steps {s}", len(sd.steps) == len(digits), {"steps": len(sd.steps), "leader digits": len(digits)})


def _check_steps(rep: VerificationReport, ctx: dict) -> None:
    """Every digit map: identity at c=0, full base coverage, disjoint fibers, prescribed ratios."""
    sides, eps, mode = ctx["sides"], ctx["eps"], ctx["mode"]
    for s in dg.SIDES:
        sd = sides[s]
        o = sides[dg.other(s)]
        digits = [(n, lo, hi, j) for n, lo, hi in o.blocks for j in range(lo, hi)]
        hm, lv = sd.high.measure, sd.high.levels
        for k, (st, (n, lo, hi, j)) in enumerate(zip(sd.steps, digits)):
            tag = f"step {s}{k}"
            want = dg.digit_ratios(o.sys, j)
            rep.add(f"{tag} ratios", st.rhos == want and st.level == n, {"level": st.level, "expected level": n})
            bad = [g for g in st.maps if g.defect]
            rep.add(f"{tag} covers base", not bad, len(bad))
            ident = all(p == 0 for _, p in st.maps[0].pieces) and st.maps[0].covered == st.base
            fibers = [g.image_set for g in st.maps]
            disjoint = all(fibers[i].is_disjoint(fibers[q]) for i in range(len(fibers)) for q in range(i))
            inside = all(f.is_subset(st.pool) for f in fibers)
            rep.add(f"{tag} splitting", ident and disjoint and inside, {"identity": ident, "disjoint": disjoint, "inside": inside})
            lost = hm.measure_of(st.pool) - sum((hm.measure_of(f) for f in fibers), Fraction(0))
            rep.add(f"{tag} loss", lost == st.loss, lost)
            if mode == "lambda":
                lo_b = hi_b = Fraction(1)
            else:
                e, _ = exp_bracket(eps[n - 1] / (hi - lo))
                lo_b, hi_b = 1 / e, e
            worst = None
            for c, g in enumerate(st.maps):
                for w, p in g.pieces:
                    q = hm.cylinder(shift(lv, w, p)) / hm.cylinder(w) / st.rhos[c]
                    if not lo_b <= q <= hi_b:
                        worst = (c, w, q)
                        break
                if worst:
                    break
            rep.add(f"{tag} piece cocycles", worst is None, None if worst is None else f"fiber {worst[0]} cylinder {_fw(worst[1])}")


def _fw(w) -> str:
    return ".".join(map(str, w)) if w else "-"


def _check_atoms(rep: VerificationReport, ctx: dict, art: dict, atoms: dict, b: dict) -> None:
    sides = ctx["sides"]
    stored = {tuple(z): (wa, wb, parse_rational(x), parse_rational(y)) for z, wa, wb, x, y in art["atoms"]}
    rep.add("atoms indexed once", len(stored) == len(art["atoms"]) == len(atoms), {"stored": len(art["atoms"]), "recomputed": len(atoms)})
    wrong = None
    for z, (x, y) in atoms.items():
        got = stored.get(z)
        wa = _fw(dg.z_digits(sides, z, "a")[0])
        wb = _fw(dg.z_digits(sides, z, "b")[0])
        if got != (wa, wb, x, y):
            wrong = f"atom {list(z)} (cylinder a {wa}, b {wb})"
            break
    rep.add("atom masses", wrong is None, wrong)
    rep.add(
        "psi measure deviation",
        b["discrepancy"] <= b["total"],
        {"sum |mu - mu'|": b["discrepancy"], "budget": b["total"]},
    )
    ratios = {y / x for x, y in atoms.values() if x}
    if ctx["mode"] == "lambda":
        const = len(ratios) <= 1
        rep.add("psi ratio constant on atoms", const, {"distinct ratios": len(ratios)})
    r = b["ratio"]
    worst = max((abs(q - 1) for q in ratios), default=Fraction(0))
    rep.add("psi ratio within budget of 1", worst <= b["ratio_budget"], {"max |r - 1|": worst, "budget": b["ratio_budget"], "ratio": r})
    for s in dg.SIDES:
        need = 1 - 2 * sum(ctx["eps"], Fraction(0)) - b["defect"][s]
        rep.add(f"coverage {s}", b["coverage"][s] >= need, {"coverage": b["coverage"][s], "required": need})


def _check_tables(rep: VerificationReport, ctx: dict, art: dict, tables: dict) -> None:
    sides = ctx["sides"]
    for key, mover, fol in (("n", "a", "b"), ("m", "b", "a")):
        stored = art["tables"][key]
        fresh = tables[key]
        rep.add(f"table {key} entries", len(stored) == len(fresh), {"stored": len(stored), "recomputed": len(fresh)})
        mult = sides[fol].sys.levels.radix(sides[fol].H)
        problem = None
        for e_st, e in zip(stored, fresh):
            cyl = _fw(e["cylinder"])
            if e_st["cylinder"] != cyl:
                problem = f"cylinder {e_st['cylinder']}: expected carry pattern {cyl}"
                break
            pieces = [(parse_word(w), int(p)) for w, p in e_st["pieces"]]
            if any(p % mult for _, p in pieces):
                problem = f"cylinder {cyl}: power not a multiple of M_H={mult}"
                break
            lv = sides[fol].high.levels
            try:
                g_st = GroupoidMap.build(lv, [(w, p // mult) for w, p in pieces])
            except CylinderError as err:
                problem = f"cylinder {cyl}: {err}"
                break
            g = GroupoidMap.build(lv, [(w, p // mult) for w, p in e["pieces"]])
            for w, p in g_st.pieces:
                want = g.power_at(w)
                if want is None or want != p:
                    problem = f"cylinder {cyl}: piece {_fw(w)} power {p * mult} != {None if want is None else want * mult}"
                    break
            if problem:
                break
            if g_st.covered != g.covered or g_st.image_set != g.image_set:
                problem = f"cylinder {cyl}: domain or image differs from the realised move"
                break
        rep.add(f"table {key} replay", problem is None, problem)


def verify_oe(art: dict) -> VerificationReport:
    """Recompute and audit every claim of a serialised diagram."""
    rep = VerificationReport()
    if art.get("version") != dg.ARTIFACT_VERSION:
        rep.add("version", False, art.get("version"))
        return rep
    try:
        ctx = _rebuild(art)
    except (CylinderError, KeyError, ValueError) as e:
        rep.add("artifact parses", False, str(e))
        return rep
    rep.add("artifact parses", True)
    if ctx["depth"] == 0:
        rep.add("empty diagram", not art["atoms"], len(art["atoms"]))
        return rep
    _check_plan(rep, ctx)
    _check_steps(rep, ctx)
    if not rep.ok:
        return rep
    sides, depth, eps, mode = ctx["sides"], ctx["depth"], ctx["eps"], ctx["mode"]
    atoms, tables, b, checks = dg.derive(sides, depth, eps, mode)
    stored_total = parse_rational(art["budgets"]["total"]["exact"])
    rep.add("budget total", stored_total == b["total"], {"stored": stored_total, "recomputed": b["total"]})
    for c in checks["castle"]:
        rep.add(f"triangle level {c['level']}", c["triangle"], {"hi": c["hi"], "needed": prefix_distance_depth(eps[c["level"] - 1])})
        rep.add(f"diamond level {c['level']}", c["diamond"], {"mu(O)": c["mu_O"]})
    _check_atoms(rep, ctx, art, atoms, b)
    _check_tables(rep, ctx, art, tables)
    for c in checks.get("a_n", []):
        rep.add(f"a_n level {c['level']} side {c['side']}", c["ok"], {"bound": c["bound"], "worst ratio": c["worst_ratio"]})
    return rep


def load_artifact(path) -> dict:
    with open(path) as fh:
        return json.load(fh)


def verify_file(path) -> VerificationReport:
    return verify_oe(load_artifact(path))


def inject_fault(art: dict, table: str = "n", entry: int = 0, piece: int = 0) -> tuple:
    """Copy of ``art`` with one table power shifted by one follower odometer period.

    Returns ``(corrupted, cylinder)``; the verifier must name ``cylinder``.
    """
    bad = copy.deepcopy(art)
    e = bad["tables"][table][entry]
    fol = "b" if table == "n" else "a"
    sys = load_system(bad["sides"][fol]["system"])
    mult = sys.levels.radix(int(bad["sides"][fol]["H"]))
    e["pieces"][piece][1] += mult
    return bad, e["cylinder"]


def dumps_artifact(art: dict) -> str:
    return json.dumps(art, sort_keys=True, separators=(",", ":"))


__all__ += ["dumps_artifact", "ArtifactError", "fmt"]
