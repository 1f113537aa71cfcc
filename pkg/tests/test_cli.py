import json
import os

import numpy as np
import pytest

from mapfunc.cli import main
from mapfunc.modelfile import save_model

from conftest import (
    SEED,
    degenerate_model,
    drift_model,
    dufresne_model,
    make_model,
    pareto_jump_model,
)


@pytest.fixture
def model_file(tmp_path):
    def write(model, name="m.model"):
        path = tmp_path / name
        save_model(model, path)
        return str(path)

    return write


def read_json(path):
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)


def tree_bytes(root):
    out = {}
    for dirpath, _, files in os.walk(root):
        for f in files:
            p = os.path.join(dirpath, f)
            with open(p, "rb") as fh:
                out[os.path.relpath(p, root)] = fh.read()
    return out


# ---------------------------------------------------------------------------
# describe
# ---------------------------------------------------------------------------


def test_describe_reports_drift(model_file, capsys):
    path = model_file(drift_model(-2.0, -1.0))
    assert main(["describe", "--model", path]) == 0
    out = capsys.readouterr().out
    assert "K: -1.5" in out
    assert "degenerate: false" in out
    assert "lambda=" in out


def test_describe_degenerate(model_file, capsys):
    path = model_file(degenerate_model())
    assert main(["describe", "--model", path]) == 0
    assert "degenerate: true" in capsys.readouterr().out


def test_describe_malformed_file_names_field(tmp_path, capsys):
    path = tmp_path / "bad.model"
    path.write_text("[switching]\nqPlus = nope\n")
    assert main(["describe", "--model", str(path)]) == 1
    err = capsys.readouterr().err
    assert "qPlus" in err and "line 2" in err


def test_missing_model_file(capsys):
    assert main(["describe", "--model", "/definitely/not/here"]) == 1


# ---------------------------------------------------------------------------
# classify
# ---------------------------------------------------------------------------


def test_classify_exit_codes(model_file, tmp_path, capsys):
    assert main(["classify", "--model", model_file(drift_model(-1.0)), "--seed", "1"]) == 0
    assert main(["classify", "--model", model_file(dufresne_model(0.0, sigma=2.0)),
                 "--seed", "1"]) == 10
    capsys.readouterr()


def test_classify_json_payload(model_file, tmp_path):
    out = str(tmp_path / "out")
    assert main([
        "classify", "--model", model_file(drift_model(-1.0)), "--seed", "3", "--out", out
    ]) == 0
    payload = read_json(os.path.join(out, "verdict.json"))
    assert payload["tag"] == "ConvergentKNegative"
    assert payload["K"] == -1.0
    assert payload["seed"] == 3


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def test_simulate_writes_samples_and_manifest(model_file, tmp_path):
    out = str(tmp_path / "out")
    path = model_file(drift_model(-1.0))
    assert main(["simulate", "--model", path, "--seed", "5", "--n", "300",
                 "--out", out]) == 0
    manifest = read_json(os.path.join(out, "manifest.json"))
    assert manifest["requested"] == 300
    assert manifest["kept"] == 300
    assert manifest["divergedFraction"] == 0.0
    assert manifest["seed"] == 5
    assert sorted(manifest["files"]) == ["a.csv", "b.csv"]
    with open(os.path.join(out, "a.csv")) as fh:
        header = fh.readline()
    assert "count=300" in header


def test_simulate_refuses_divergent_without_force(model_file, tmp_path, capsys):
    out = str(tmp_path / "out")
    path = model_file(drift_model(0.5))
    assert main(["simulate", "--model", path, "--seed", "5", "--n", "50",
                 "--out", out]) == 10
    capsys.readouterr()
    out2 = str(tmp_path / "out2")
    assert main(["simulate", "--model", path, "--seed", "5", "--n", "50",
                 "--out", out2, "--force"]) == 0


def test_simulate_binary_format(model_file, tmp_path):
    out = str(tmp_path / "out")
    path = model_file(drift_model(-1.0))
    assert main(["simulate", "--model", path, "--seed", "5", "--n", "64",
                 "--out", out, "--format", "bin"]) == 0
    with open(os.path.join(out, "a.mfs"), "rb") as fh:
        assert fh.read(4) == b"MFS1"
    assert os.path.exists(os.path.join(out, "a.mfs.json"))


def test_simulate_reproducible_byte_for_byte(model_file, tmp_path):
    path = model_file(pareto_jump_model(3.0))
    runs = []
    for name, threads in (("r1", "1"), ("r2", "1"), ("r4", "4")):
        out = str(tmp_path / name)
        assert main(["simulate", "--model", path, "--seed", "9", "--n", "2000",
                     "--out", out, "--threads", threads]) == 0
        runs.append(tree_bytes(out))
    assert runs[0] == runs[1] == runs[2]


# ---------------------------------------------------------------------------
# cramer
# ---------------------------------------------------------------------------


def test_cramer_reports_root(model_file, tmp_path):
    out = str(tmp_path / "out")
    path = model_file(dufresne_model(1.0))
    code = main(["cramer", "--model", path, "--seed", "4", "--n", "30000",
                 "--window", "1e-2:1e-3", "--out", out])
    assert code == 0
    rep = read_json(os.path.join(out, "cramer.json"))
    assert abs(rep["kappa"] - 2.0) <= 1e-10
    assert abs(rep["meanOneResidual"]) <= 1e-8
    assert rep["momentConditionOk"] is True
    assert rep["latticeOk"] is True
    assert "cA" in rep and "cBplus" in rep and "cBminus" in rep
    assert os.path.exists(os.path.join(out, "fit.csv"))


def test_cramer_no_root_exit_with_scan(model_file, tmp_path):
    out = str(tmp_path / "out")
    path = model_file(drift_model(-1.0))
    assert main(["cramer", "--model", path, "--seed", "4", "--out", out]) == 11
    rep = read_json(os.path.join(out, "cramer.json"))
    assert rep["status"] == "NoRoot"
    assert len(rep["lambdaScan"]) > 10


# ---------------------------------------------------------------------------
# subexp
# ---------------------------------------------------------------------------


def test_subexp_pass_and_artifacts(model_file, tmp_path):
    out = str(tmp_path / "out")
    path = model_file(pareto_jump_model(3.0))
    code = main(["subexp", "--model", path, "--seed", "2", "--n", "150000",
                 "--out", out, "--diagnose", "--paths", "400"])
    assert code == 0
    rep = read_json(os.path.join(out, "subexp.json"))
    assert rep["dominantComponent"] == "uPlus"
    assert rep["inBand"] is True
    assert "excursions" in rep
    assert os.path.exists(os.path.join(out, "ratio.csv"))


def test_subexp_rejects_light_model(model_file, capsys):
    path = model_file(dufresne_model(0.75))
    assert main(["subexp", "--model", path, "--seed", "2", "--n", "500"]) == 12
    capsys.readouterr()


# ---------------------------------------------------------------------------
# checks
# ---------------------------------------------------------------------------


def test_checks_pass_on_heavy_model(model_file, tmp_path):
    out = str(tmp_path / "out")
    path = model_file(pareto_jump_model(3.0))
    code = main(["checks", "--model", path, "--seed", "6", "--n", "20000",
                 "--paths", "500", "--out", out])
    rep = read_json(os.path.join(out, "checks.json"))
    assert code == 0, rep["failures"]
    assert rep["failures"] == []
    assert rep["results"]["logBound"]["violations"] == 0


def test_checks_negative_control_fails(model_file, tmp_path, capsys):
    out = str(tmp_path / "out")
    path = model_file(pareto_jump_model(3.0))
    code = main(["checks", "--model", path, "--seed", "6", "--n", "20000",
                 "--paths", "500", "--out", out, "--corrupt-logbound-c"])
    assert code == 13
    rep = read_json(os.path.join(out, "checks.json"))
    assert "logBound" in rep["failures"]
    capsys.readouterr()


def test_checks_reports_stable_schema(model_file, tmp_path):
    out1, out2 = str(tmp_path / "a"), str(tmp_path / "b")
    path = model_file(pareto_jump_model(3.0))
    for out in (out1, out2):
        main(["checks", "--model", path, "--seed", "6", "--n", "5000",
              "--paths", "200", "--out", out])
    assert tree_bytes(out1) == tree_bytes(out2)


# ---------------------------------------------------------------------------
# usage
# ---------------------------------------------------------------------------


def test_usage_errors_exit_one(capsys):
    with pytest.raises(SystemExit) as err:
        main(["classify"])  # missing --model
    assert err.value.code == 1
    capsys.readouterr()


def test_env_threads_fallback(model_file, tmp_path, monkeypatch):
    monkeypatch.setenv("MAPFUNC_THREADS", "2")
    out = str(tmp_path / "out")
    path = model_file(drift_model(-1.0))
    assert main(["simulate", "--model", path, "--seed", "1", "--n", "100",
                 "--out", out]) == 0
