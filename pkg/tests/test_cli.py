import json

import pytest

from bowditch.lab import load_scenario
from bowditch.lab.cli import main


def run(capsys, *argv):
    code = main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def test_validate(capsys):
    code, out, _ = run(capsys, "validate", "--scenario", "ex74")
    assert code == 0
    assert out.startswith("ok: True") and "edge e end w" in out


def test_parabolize_roundtrip(capsys):
    code, out, _ = run(capsys, "parabolize", "--scenario", "hnn")
    assert code == 0
    data = json.loads(out)
    assert {v["id"] for v in data["vertices"]} == {"X"}


def test_tree_csv_and_dot(capsys):
    code, out, _ = run(capsys, "tree", "--scenario", "ex73_i", "--radius", "1")
    assert code == 0 and len(out.splitlines()) == 1 + 6
    code, out, _ = run(capsys, "tree", "--scenario", "ex73_i", "--radius", "1", "--format", "dot")
    assert code == 0 and out.startswith("graph") and out.count("--") == 5


def test_domain(capsys):
    code, out, _ = run(capsys, "domain", "--scenario", "ex74_index3", "--radius", "3")
    assert code == 0 and len(out.splitlines()) == 1 + 4


def test_components_expectation_met(capsys):
    code, out, err = run(capsys, "components", "--scenario", "ex74", "--depth", "4")
    assert code == 0
    assert out.splitlines()[1].split(",")[:3] == ["4", "2", "3"]
    assert "expectation met" in err


def test_components_mismatch_exit_code(capsys, tmp_path):
    data = json.loads(load_scenario("ex74").source)
    data["expect"] = {"components": {"4": 5}}
    path = tmp_path / "wrong.json"
    path.write_text(json.dumps(data))
    code, _, err = run(capsys, "components", "--scenario", str(path), "--depth", "4")
    assert code == 2 and "MISSED" in err


def test_error_exit_code(capsys):
    code, _, err = run(capsys, "components", "--scenario", "no_such_scenario")
    assert code == 1 and err.startswith("error:")
    code, _, err = run(capsys, "components", "--scenario", "ex73_i", "--depth", "5", "--budget", "10")
    assert code == 1 and "budget" in err


def test_dynamics_probe(capsys):
    code, out, err = run(capsys, "dynamics", "--scenario", "ex73_i", "--probe", "dyn-qc", "--depth", "4")
    assert code == 0 and out.count("\n") > 1
    assert json.loads(err[2:])


def test_limitset(capsys):
    code, _, err = run(capsys, "limitset", "--scenario", "ex73_i", "--samples", "20")
    summary = json.loads(err[2:])
    assert code == 0 and summary["agree"] == summary["samples"] == 20


def test_homeo_refusal_and_map(capsys):
    code, out, _ = run(capsys, "homeo", "--scenario", "ex73_i", "--other", "ex73_ii")
    assert code == 0 and out.startswith("refused: hypothesis index")
    code, out, _ = run(capsys, "homeo", "--scenario", "ex74", "--other", "ex74_renamed", "--map", "R:a=b,b=A")
    assert code == 0 and "R->R: a->b, b->A" in out


def test_export_deterministic(capsys, tmp_path):
    for name in ("a", "b"):
        code, _, _ = run(capsys, "export", "--scenario", "ex74", "--radius", "2", "--depth", "4",
                         "--out", str(tmp_path / name))
        assert code == 0
    files = sorted(p.name for p in (tmp_path / "a").iterdir())
    assert files == ["components.csv", "domain.csv", "domain.dot", "manifest.json", "tree.csv", "tree.dot"]
    for f in files:
        assert (tmp_path / "a" / f).read_bytes() == (tmp_path / "b" / f).read_bytes()


def test_missing_subcommand():
    with pytest.raises(SystemExit):
        main([])
