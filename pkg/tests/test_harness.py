"""Command line harness: exit codes, run directories, determinism, reports."""

import glob
import hashlib
import json
import os

import pytest

from coulomb_lab.errors import SchemaError
from coulomb_lab.harness import verify as verify_mod
from coulomb_lab.harness.cli import main, resolve_threads
from coulomb_lab.harness.report import preset_coverage, render
from coulomb_lab.harness.schema import load_config, validate_config

QUAD = {"kind": "quadratic", "dim": 2, "parameters": {"coefficient": 0.5}}


def _write(path, doc):
    with open(path, "w") as fh:
        json.dump(doc, fh)
    return str(path)


def _sha(path):
    with open(path, "rb") as fh:
        return hashlib.sha256(fh.read()).hexdigest()


def _only_dir(root, prefix):
    dirs = glob.glob(os.path.join(root, prefix + "-*"))
    assert len(dirs) == 1
    return dirs[0]


@pytest.fixture(scope="module")
def workspace(tmp_path_factory):
    """Equilibrium (with a thermal artifact) and a small sample run shared by the tests."""
    root = tmp_path_factory.mktemp("cli")
    out = str(root / "runs")
    eq_cfg = _write(root / "eq.json", {"schemaVersion": 1, "kind": "equilibrium", "potential": QUAD,
                                       "thermal": {"theta": [5]}})
    assert main(["equilibrium", "--config", eq_cfg, "--out", out]) == 0
    eq_dir = _only_dir(out, "equilibrium")
    s_cfg = _write(root / "s.json", {"schemaVersion": 1, "kind": "sample", "potential": QUAD, "N": 10,
                                     "beta": 0.5, "samples": 200, "chains": 2, "init": "thermal",
                                     "equilibriumArtifact": eq_dir})
    assert main(["sample", "--config", s_cfg, "--out", out]) == 0
    return {"root": root, "out": out, "eq_dir": eq_dir, "sample_cfg": s_cfg,
            "sample_dir": _only_dir(out, "sample")}


def test_equilibrium_artifacts(workspace):
    names = sorted(os.listdir(workspace["eq_dir"]))
    for n in ("equilibrium.json", "equilibrium.npz", "thermal_theta5.json", "thermal_theta5.npz",
              "solver_log.json", "manifest.json"):
        assert n in names


def test_sample_deterministic_across_out_roots(workspace, tmp_path):
    first = os.path.join(workspace["sample_dir"], "samples.bin")
    assert main(["sample", "--config", workspace["sample_cfg"], "--out", str(tmp_path)]) == 0
    again = os.path.join(_only_dir(str(tmp_path), "sample"), "samples.bin")
    assert _sha(first) == _sha(again)


def test_existing_run_directory_is_not_rewritten(workspace):
    path = os.path.join(workspace["sample_dir"], "samples.bin")
    before = os.path.getmtime(path)
    assert main(["sample", "--config", workspace["sample_cfg"], "--out", workspace["out"]]) == 0
    assert os.path.getmtime(path) == before


def test_seed_changes_run_directory(workspace, tmp_path):
    assert main(["sample", "--config", workspace["sample_cfg"], "--out", str(tmp_path), "--seed", "3"]) == 0
    d = _only_dir(str(tmp_path), "sample")
    assert os.path.basename(d) != os.path.basename(workspace["sample_dir"])


def test_missing_thermal_artifact_exit_3(workspace, tmp_path):
    cfg = _write(tmp_path / "s.json", {"schemaVersion": 1, "kind": "sample", "potential": QUAD, "N": 10,
                                       "beta": 0.2, "samples": 50, "init": "thermal",
                                       "equilibriumArtifact": workspace["eq_dir"]})
    assert main(["sample", "--config", cfg, "--out", str(tmp_path / "runs")]) == 3


def test_malformed_config_exit_2(tmp_path):
    bad = tmp_path / "bad.json"
    bad.write_text("{bad")
    assert main(["equilibrium", "--config", str(bad), "--out", str(tmp_path)]) == 2
    extra = _write(tmp_path / "extra.json", {"schemaVersion": 1, "kind": "equilibrium", "potential": QUAD,
                                             "unknownKey": 1})
    assert main(["equilibrium", "--config", extra, "--out", str(tmp_path)]) == 2
    wrong_kind = _write(tmp_path / "wk.json", {"schemaVersion": 1, "kind": "verify"})
    assert main(["sample", "--config", wrong_kind, "--out", str(tmp_path)]) == 2


def test_estimate_writes_index(workspace, tmp_path):
    cfg = _write(tmp_path / "e.json", {
        "schemaVersion": 1, "kind": "estimate", "samples": workspace["sample_dir"],
        "estimators": [{"name": "rho1"}, {"name": "count_in_ball", "balls": [[[0, 0], 1.5]]},
                       {"name": "extreme_radius"}]})
    assert main(["estimate", "--config", cfg, "--out", str(tmp_path / "runs")]) == 0
    d = _only_dir(str(tmp_path / "runs"), "estimate")
    with open(os.path.join(d, "index.json")) as fh:
        index = json.load(fh)
    assert index["N"] == 10 and index["dim"] == 2
    assert [r["estimator"] for r in index["reports"]] == ["rho1", "count_in_ball", "extreme_radius"]
    for r in index["reports"]:
        assert os.path.exists(os.path.join(d, r["json"])) and os.path.exists(os.path.join(d, r["csv"]))


def test_estimate_dimension_mismatch_exit_5(workspace, tmp_path):
    cfg = _write(tmp_path / "e.json", {
        "schemaVersion": 1, "kind": "estimate", "samples": workspace["sample_dir"],
        "estimators": [{"name": "subharmonicity", "balls": [[[6, 0, 0], 1.0]]}]})
    assert main(["estimate", "--config", cfg, "--out", str(tmp_path / "runs")]) == 5


def test_estimate_empty_sample_exit_4(tmp_path):
    (tmp_path / "empty.bin").write_bytes(b"")
    cfg = _write(tmp_path / "e.json", {"schemaVersion": 1, "kind": "estimate", "samples": "empty.bin",
                                       "estimators": [{"name": "rho1"}]})
    assert main(["estimate", "--config", cfg, "--out", str(tmp_path / "runs")]) == 4


def test_verify_only_split(tmp_path, capsys):
    assert main(["verify", "--only", "split", "--out", str(tmp_path)]) == 0
    with open(os.path.join(_only_dir(str(tmp_path), "verify"), "verify.json")) as fh:
        doc = json.load(fh)
    assert list(doc) == ["split"]
    assert all(c["passed"] for c in doc["split"])
    assert "split_identity_d2" in capsys.readouterr().out


def test_verify_unknown_group_exit_2(tmp_path):
    assert main(["verify", "--only", "nope", "--out", str(tmp_path)]) == 2


def test_verify_failing_contract_exit_1(tmp_path, monkeypatch, capsys):
    # mutation: a contract that cannot hold must surface as exit code 1
    broken = {"name": "broken", "value": 1.0, "threshold": 0.0, "passed": False}
    monkeypatch.setitem(verify_mod.RUNNERS, "split", lambda rng: [broken])
    assert main(["verify", "--only", "split", "--out", str(tmp_path)]) == 1
    assert "broken" in capsys.readouterr().err


def test_threads_from_environment(monkeypatch):
    monkeypatch.setenv("COULOMB_LAB_THREADS", "2")
    assert resolve_threads(None) == 2
    assert resolve_threads(1) == 1
    monkeypatch.setenv("COULOMB_LAB_THREADS", "many")
    with pytest.raises(SchemaError):
        resolve_threads(None)
    monkeypatch.delenv("COULOMB_LAB_THREADS")
    assert resolve_threads(None) == 1


def test_report_not_run_rows_and_coverage(workspace, tmp_path):
    assert preset_coverage() == list(range(1, 11))
    text = render([workspace["out"]])
    assert text.count("NOT RUN") == 10
    assert "10 of 10 criteria" in text
    assert main(["report", workspace["out"], "--out", str(tmp_path)]) == 0
    assert os.path.exists(tmp_path / "report.md")


def test_acceptance_preset_runs_selected_criterion(tmp_path):
    from coulomb_lab.harness.report import preset_path

    assert main(["verify", "--config", preset_path("acceptance.json"), "--only", "1",
                 "--out", str(tmp_path)]) == 0
    text = render([str(tmp_path)])
    assert "| 1 |" in text and text.count("NOT RUN") == 9


@pytest.mark.parametrize("name", ["acceptance.json", "equilibrium_quadratic.json", "equilibrium_quartic.json",
                                  "estimate_ginibre.json", "ginibre_sample.json", "verify_default.json"])
def test_presets_validate(name):
    from coulomb_lab.harness.report import preset_path

    doc, _ = load_config(preset_path(name))
    assert doc["schemaVersion"] == 1


def test_schema_rejects_bad_version():
    with pytest.raises(SchemaError):
        validate_config({"schemaVersion": 2, "kind": "verify"})
    with pytest.raises(SchemaError):
        validate_config({"schemaVersion": 1, "kind": "mystery"})
