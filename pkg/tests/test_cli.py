import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from plaptree.cli import main, parse_document, tree_document
from plaptree.oracle import solve_principal
from plaptree.tree import generate_homogeneous

DATA = Path(__file__).parent / "data"
# solver-internal details that legitimately vary with floating-point libraries
VOLATILE = {"residual", "relative_gap", "best", "iterations", "lower_source", "upper_source"}


def same_report(got, want, path="$"):
    assert type(got) is type(want) or {type(got), type(want)} <= {int, float}, path
    if isinstance(want, dict):
        assert set(got) == set(want), path
        for k in want:
            if k not in VOLATILE:
                same_report(got[k], want[k], f"{path}.{k}")
    elif isinstance(want, list):
        assert len(got) == len(want), path
        for k, (a, b) in enumerate(zip(got, want)):
            same_report(a, b, f"{path}[{k}]")
    elif isinstance(want, float):
        assert math.isclose(got, want, rel_tol=1e-9, abs_tol=1e-300), path
    else:
        assert got == want, path


def run(capsys, *args):
    code = main([str(a) for a in args])
    out = capsys.readouterr()
    return code, out.out, out.err


@pytest.mark.parametrize("args, golden", [
    (("bounds", "edge.json"), "golden_bounds_edge.json"),
    (("bounds", "path2.json"), "golden_bounds_path2.json"),
    (("solve", "path2.json", "--sequence"), "golden_solve_path2.json"),
    (("solve", "edge.json"), "golden_solve_edge.json"),
])
def test_golden_reports(capsys, args, golden):
    code, out, _ = run(capsys, args[0], DATA / args[1], *args[2:], "--json")
    assert code == 0
    same_report(json.loads(out), json.loads((DATA / golden).read_text()))


def test_bounds_values(capsys):
    _, out, _ = run(capsys, "bounds", DATA / "edge.json", "--json")
    rep = json.loads(out)
    assert rep["profile_bounds"]["lower"] == 0.333333333333
    assert rep["profile_bounds"]["upper"] == 0.666666666667
    assert rep["profile_bounds"]["upper_source"] == "upper = 1/sigma"
    _, out, _ = run(capsys, "bounds", DATA / "path2.json", "--json")
    b = json.loads(out)["profile_bounds"]
    assert (b["lower"], b["upper"]) == (0.25, 0.5)


def test_solve_values(capsys):
    _, out, _ = run(capsys, "solve", DATA / "path2.json", "--json", "--sequence")
    rep = json.loads(out)
    assert abs(rep["lambda"] - 0.3819660113) <= 1e-9
    assert rep["sequence"][0] == [1, 0.5]
    assert rep["interval"]["lower"] <= rep["lambda"] <= rep["interval"]["upper"]
    _, out, _ = run(capsys, "solve", DATA / "edge.json", "--json", "--p", "3")
    assert json.loads(out)["lambda"] == 0.666666666667


def test_text_output(capsys):
    code, out, _ = run(capsys, "solve", DATA / "path2.json")
    assert code == 0 and "lambda = 0.381966011254" in out


def test_test_function_bound(capsys, tmp_path):
    tf = tmp_path / "w.json"
    tf.write_text(json.dumps({"domain": "W_tilde", "cutoff": 1, "values": {"a": None, "b": 1.0}}))
    code, out, _ = run(capsys, "bounds", DATA / "path2.json", "--test-function", tf, "--json")
    assert code == 0
    rep = json.loads(out)["test_function"]
    assert rep["upper"] == 0.5 and rep["domain"] == "W_tilde:1"
    tf.write_text(json.dumps({"domain": "F_I", "values": {"a": 1.0, "b": 1.0}}))
    code, _, err = run(capsys, "bounds", DATA / "path2.json", "--test-function", tf)
    assert code == 2 and "'b'" in err
    tf.write_text(json.dumps({"domain": "F_I", "values": {"a": 1.0, "zz": 2.0}}))
    code, _, err = run(capsys, "bounds", DATA / "path2.json", "--test-function", tf)
    assert code == 2 and "'zz'" in err


@pytest.mark.parametrize("doc, needle", [
    ({"format_version": 1, "vertices": [{"id": "o", "parent": None, "mu": 1},
                                        {"id": "x", "parent": "zz", "mu": 1, "nu": 1}]}, "'x'"),
    ({"format_version": 1, "vertices": [{"id": "o", "parent": None, "mu": 1},
                                        {"id": "x", "parent": "o", "mu": 1}]}, "'x'"),
    ({"format_version": 1, "vertices": [{"id": "o", "parent": None, "mu": 1},
                                        {"id": "q", "parent": "o", "mu": 0, "nu": 1}]}, "'q'"),
    ({"vertices": []}, "format_version"),
    ({"format_version": 1, "p": 0.5, "vertices": [{"id": "o", "parent": None, "mu": 1},
                                                  {"id": "x", "parent": "o", "mu": 1, "nu": 1}]}, "p must"),
])
def test_input_errors(capsys, tmp_path, doc, needle):
    path = tmp_path / "bad.json"
    path.write_text(json.dumps(doc))
    code, _, err = run(capsys, "solve", path, *(() if "p" in doc else ("--p", "2")))
    assert code == 2 and needle in err


def test_malformed_json(capsys, tmp_path):
    path = tmp_path / "bad.json"
    path.write_text("{oops")
    code, _, err = run(capsys, "bounds", path)
    assert code == 2 and "malformed" in err


def test_generate(capsys, tmp_path):
    out = tmp_path / "h.json"
    assert run(capsys, "generate", "--homogeneous", 2, 2, 0.25, 1, "--out", out)[0] == 0
    doc = json.loads(out.read_text())
    assert len(doc["vertices"]) == 4 and doc["meta"]["sigma_closed_form"] == 1.5
    assert run(capsys, "generate", "--homogeneous", 1, 3, 0.5, 1)[0] == 0
    code, _, err = run(capsys, "generate", "--homogeneous", 2, 2, 0.6, 1)
    assert code == 2 and "t must lie in (0, 1/r)" in err


def test_generate_solve_round_trip(capsys, tmp_path):
    out = tmp_path / "h.json"
    run(capsys, "generate", "--homogeneous", 2, 4, 0.25, 1, "--p", 3, "--out", out)
    tree, p, _ = parse_document(json.loads(out.read_text()))
    direct = solve_principal(generate_homogeneous(2, 4, 0.25, 1.0), 3.0)
    assert solve_principal(tree, p).lam == direct.lam
    _, text, _ = run(capsys, "solve", out, "--json")
    assert json.loads(text)["lambda"] == float(f"{direct.lam:.12g}")
    doc = tree_document(tree, p)
    assert parse_document(json.loads(json.dumps(doc)))[0].ids == tree.ids


def test_bounds_reports_both_homogeneous_constants(capsys, tmp_path):
    out = tmp_path / "h.json"
    run(capsys, "generate", "--homogeneous", 2, 2, 0.25, 1, "--out", out)
    _, text, _ = run(capsys, "bounds", out, "--json")
    h = json.loads(text)["homogeneous_constant"]
    assert h["printed"] == 10.0 and h["computed"] == 2.0


def test_verify_suites(capsys):
    code, out, _ = run(capsys, "verify", DATA / "path2.json", "--suite", "equalities", "--json")
    rep = json.loads(out)
    assert code == 0 and len(rep["suites"]["equalities"]) == 3
    assert all(c["status"] == "pass" for c in rep["suites"]["equalities"])
    code, out, _ = run(capsys, "verify", DATA / "path2.json", "--suite", "identities", "--json")
    assert code == 0 and {c["property"] for c in json.loads(out)["suites"]["identities"]} == {
        "summation by parts", "energy equals pairing"}
    code, out, _ = run(capsys, "verify", DATA / "path2.json", "--p", "1.5", "--suite", "lemma21")
    assert code == 0 and "skipped: open for p<2" in out
    code, out, _ = run(capsys, "verify", DATA / "path2.json")
    assert code == 0 and "FAIL" not in out


def test_verify_reports_failure(capsys, tmp_path):
    # geometric path: the printed lower bound overshoots the eigenvalue
    verts = [{"id": "o", "parent": None, "mu": 1.0, "nu": None}]
    verts += [{"id": str(k), "parent": "o" if k == 1 else str(k - 1), "mu": 0.5 ** k, "nu": 0.5 ** k}
              for k in range(1, 31)]
    path = tmp_path / "geo.json"
    path.write_text(json.dumps({"format_version": 1, "p": 2, "vertices": verts}))
    code, out, _ = run(capsys, "verify", path, "--suite", "sandwich", "--json")
    assert code == 1
    failed = [c for c in json.loads(out)["suites"]["sandwich"] if c["status"] == "fail"]
    assert [c["property"] for c in failed] == ["profile lower <= lambda"]


def test_nonconvergence_exit_code(capsys, tmp_path):
    out = tmp_path / "h.json"
    run(capsys, "generate", "--homogeneous", 2, 4, 0.25, 1, "--out", out)
    code, text, err = run(capsys, "solve", out, "--p", "3", "--max-iters", "1", "--tol", "1e-14", "--json")
    assert code == 3 and "did not converge" in err
    rep = json.loads(text)
    assert rep["converged"] is False and rep["interval"]["lower"] < rep["interval"]["upper"]


def test_console_entry_point():
    proc = subprocess.run([sys.executable, "-m", "plaptree.cli", "bounds", str(DATA / "edge.json")],
                          capture_output=True, text=True)
    assert proc.returncode == 0 and "0.666666666667" in proc.stdout
