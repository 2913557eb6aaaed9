import json

import pytest

from finitary_oe.cli import EXIT_CONFIG, EXIT_MISMATCH, EXIT_OK, EXIT_VERIFY, main
from finitary_oe.equivalence.verify import inject_fault, load_artifact


def run(capsys, *argv):
    code = main([str(a) for a in argv])
    out = capsys.readouterr()
    return code, out.out, out.err


def test_cocycle(capsys, configs):
    code, out, _ = run(capsys, "cocycle", configs / "binary.cfg", "--word", "1.1.0", "--power", "1")
    assert code == EXIT_OK and out.strip() == "2/1"


def test_classify_binary(capsys, configs):
    code, out, _ = run(capsys, "classify", configs / "binary.cfg", "--seed", "11")
    doc = json.loads(out)
    assert code == EXIT_OK and doc["summary"] == "III_lambda lambda=1/2" and doc["seed"] == 11


def test_classify_uniform(capsys, configs):
    code, out, _ = run(capsys, "classify", configs / "uniform.cfg")
    assert json.loads(out)["summary"] == "measure-preserving"


def test_classify_bad_rational(capsys, configs):
    code, _, err = run(capsys, "classify", configs / "bad_rational.cfg")
    assert code == EXIT_CONFIG and "line 2" in err


def test_missing_file(capsys, tmp_path):
    code, _, _ = run(capsys, "classify", tmp_path / "nope.cfg")
    assert code == EXIT_CONFIG


def test_bad_eps_flag(capsys, configs):
    code, _, err = run(capsys, "build-oe", configs / "binary.cfg", configs / "ternary.cfg", "--eps", "1/0")
    assert code == EXIT_CONFIG and "--eps" in err


def test_special_measure(capsys, configs):
    code, out, _ = run(capsys, "special-measure", configs / "perturbed_ternary.cfg", "--etas", "1/2,1/4,1/8,1/16")
    doc = json.loads(out)
    assert code == EXIT_OK and doc["check_special"]["ok"]
    assert doc["etas"] == ["1/2", "1/4", "1/8", "1/16"]


def test_example_1_6(capsys):
    code, out, _ = run(capsys, "example-1-6", "--lam", "1/2", "--alpha", "1/3", "--depth", "6")
    doc = json.loads(out)
    assert code == EXIT_OK
    assert doc["verdict"] == "T and T_A not almost continuously orbit equivalent"
    assert doc["levels"]["block"] == [2, 11]


def test_build_refuses_mismatch(capsys, configs):
    code, _, err = run(capsys, "build-oe", configs / "binary.cfg", configs / "alternating.cfg")
    assert code == EXIT_MISMATCH and "refused" in err


def test_build_depth_zero_warns(capsys, configs, tmp_path):
    out_file = tmp_path / "a.json"
    code, out, err = run(capsys, "build-oe", configs / "binary.cfg", configs / "ternary.cfg", "--depth", "0", "--out", out_file)
    assert code == EXIT_OK and "warning" in err
    assert json.loads(out)["atoms"] == 0
    assert load_artifact(out_file)["atoms"] == []


@pytest.fixture(scope="module")
def artifact(tmp_path_factory):
    from pathlib import Path

    cfg = Path(__file__).resolve().parent.parent / "configs"
    path = tmp_path_factory.mktemp("art") / "lam.json"
    assert main(["build-oe", str(cfg / "binary.cfg"), str(cfg / "ternary.cfg"), "--depth", "2", "--seed", "5", "--out", str(path)]) == 0
    return path


def test_build_summary_and_verify(capsys, artifact, tmp_path):
    capsys.readouterr()
    code, out, _ = run(capsys, "verify-oe", artifact, "--out", tmp_path / "r1.json")
    assert code == EXIT_OK
    doc = json.loads((tmp_path / "r1.json").read_text())
    assert doc["ok"] and doc["seed"] == 5


def test_verify_report_identical(capsys, artifact, tmp_path):
    run(capsys, "verify-oe", artifact, "--out", tmp_path / "r1.json")
    run(capsys, "verify-oe", artifact, "--out", tmp_path / "r2.json")
    assert (tmp_path / "r1.json").read_bytes() == (tmp_path / "r2.json").read_bytes()


def test_verify_fault_exit_5(capsys, artifact, tmp_path):
    bad, cyl = inject_fault(load_artifact(artifact), "n", 0, 0)
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(bad))
    code, out, _ = run(capsys, "verify-oe", p)
    assert code == EXIT_VERIFY
    assert any(f"cylinder {cyl}" in f for f in json.loads(out)["failures"])


def test_verify_garbage(capsys, tmp_path):
    p = tmp_path / "x.json"
    p.write_text("{not json")
    code, _, _ = run(capsys, "verify-oe", p)
    assert code == EXIT_CONFIG
