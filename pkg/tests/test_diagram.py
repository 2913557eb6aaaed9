import json
from fractions import Fraction as F

import pytest

from conftest import alternating, binary, ternary
from finitary_oe.equivalence import DiagramError, TypeMismatch, build_diagram, inject_fault, verify_oe
from finitary_oe.equivalence.diagram import default_eps, plan_castles
from finitary_oe.equivalence.verify import dumps_artifact
from finitary_oe.odometer import OdometerSystem, shift


def bin40():
    return binary(depth_max=40)


@pytest.fixture(scope="module")
def small_lambda():
    return build_diagram(bin40(), ternary(), depth=2).to_json()


@pytest.fixture(scope="module")
def small_iii1():
    return build_diagram(alternating(), alternating(swapped=True), depth=2).to_json()


def atom_ratio_oracle(art):
    """Recompute every atom's mass ratio from its exact strings."""
    return [F(mb) / F(ma) for _, _, _, ma, mb in art["atoms"]]


# -- set-up --------------------------------------------------------------------------


def test_default_eps():
    assert default_eps(3) == [F(1, 4), F(1, 8), F(1, 16)]


def test_plan_castles_small_top_mass():
    sys = bin40()
    eps = default_eps(4)
    plan = plan_castles(sys, [1, 3], eps)
    lo = 0
    for lvl, a, b in plan:
        assert a == lo and b > a
        assert sys.measure.cylinder((1,) * b) < eps[lvl - 1]
        lo = b


def test_type_mismatch():
    with pytest.raises(TypeMismatch):
        build_diagram(bin40(), alternating(), depth=2)


def test_lambda_mismatch():
    three = OdometerSystem.from_weights([(F(3, 4), F(1, 4))], depth_max=30)
    with pytest.raises(TypeMismatch):
        build_diagram(bin40(), three, depth=2)


def test_non_special_measure_refused():
    sys = bin40()
    bent = sys.with_measure(sys.measure.with_density({(0,): F(9, 8), (1,): F(3, 4)}))
    with pytest.raises(DiagramError):
        build_diagram(bent, ternary(), depth=2)


def test_negative_depth():
    with pytest.raises(DiagramError):
        build_diagram(bin40(), ternary(), depth=-1)


# -- degenerate depths ----------------------------------------------------------------


def test_depth_zero_empty():
    oe = build_diagram(bin40(), ternary(), depth=0)
    assert oe.atoms == {} and oe.budgets["coverage"] == {"a": 0, "b": 0}
    rep = verify_oe(oe.to_json())
    assert rep.ok


def test_depth_one():
    oe = build_diagram(bin40(), ternary(), depth=1)
    assert len(oe.atoms) == 8
    assert verify_oe(oe.to_json()).ok


# -- self-equivalence ----------------------------------------------------------------


@pytest.mark.parametrize("make, depth", [(bin40, 3), (alternating, 2)])
def test_self_equivalence_zero_budget(make, depth):
    oe = build_diagram(make(), make(), depth=depth)
    assert oe.budgets["total"] == 0 and oe.budgets["discrepancy"] == 0
    assert all(x == y for x, y in oe.atoms.values())
    assert verify_oe(oe.to_json()).ok


# -- the lambda diagram ---------------------------------------------------------------


def test_small_lambda_verifies(small_lambda):
    rep = verify_oe(small_lambda)
    assert rep.ok, rep.failures


def test_atoms_partition_coverage(small_lambda):
    b = small_lambda["budgets"]
    assert sum(F(a[3]) for a in small_lambda["atoms"]) == F(b["coverage"]["a"]["exact"])
    assert sum(F(a[4]) for a in small_lambda["atoms"]) == F(b["coverage"]["b"]["exact"])


def test_atom_ratio_constant_in_lambda_mode(small_lambda):
    rs = set(atom_ratio_oracle(small_lambda))
    assert len(rs) == 1
    (r,) = rs
    assert abs(r - 1) <= F(small_lambda["budgets"]["ratio_budget"]["exact"])


def test_step_maps_have_prescribed_ratios(small_lambda):
    from finitary_oe.config import load_system, parse_word

    for name in "ab":
        side = small_lambda["sides"][name]
        sys = load_system(side["system"])
        H = side["H"]
        high = sys.levels.shifted(H)
        mh = sys.measure.shifted(H)
        for st in side["steps"]:
            for c, pieces in enumerate(st["maps"]):
                for w, k in pieces:
                    u = parse_word(w)
                    v = shift(high, u, k)
                    assert mh.cylinder(v) / mh.cylinder(u) == F(st["rhos"][c])


def test_fault_injection_names_cylinder(small_lambda):
    for table in ("n", "m"):
        if not small_lambda["tables"][table]:
            continue
        bad, cyl = inject_fault(small_lambda, table, 0, 0)
        rep = verify_oe(bad)
        assert not rep.ok
        assert any(f"cylinder {cyl}" in f for f in rep.failures)


def test_tampered_atom_mass_detected(small_lambda):
    bad = json.loads(json.dumps(small_lambda))
    bad["atoms"][0][3] = "1/2"
    assert not verify_oe(bad).ok


def test_tampered_budget_detected(small_lambda):
    bad = json.loads(json.dumps(small_lambda))
    bad["budgets"]["total"]["exact"] = "0/1"
    assert not verify_oe(bad).ok


def test_artifact_deterministic():
    a = dumps_artifact(build_diagram(bin40(), ternary(), depth=2).to_json())
    b = dumps_artifact(build_diagram(bin40(), ternary(), depth=2).to_json())
    assert a == b


def test_report_deterministic(small_lambda):
    assert verify_oe(small_lambda).dumps() == verify_oe(json.loads(json.dumps(small_lambda))).dumps()


# -- the III_1 diagram -----------------------------------------------------------------


def test_small_iii1_verifies(small_iii1):
    rep = verify_oe(small_iii1)
    assert rep.ok, rep.failures
    assert small_iii1["mode"] == "III1"


def test_iii1_a_n_checks_present(small_iii1):
    names = [c["name"] for c in verify_oe(small_iii1).to_json()["checks"]]
    assert any(n.startswith("a_n level") for n in names)


def test_iii1_ratio_within_budget(small_iii1):
    budget = F(small_iii1["budgets"]["ratio_budget"]["exact"])
    ratio = F(small_iii1["budgets"]["ratio"]["exact"])
    assert abs(ratio - 1) <= budget
