import json
import subprocess
import sys
from pathlib import Path

import pytest

from canalqc.cli import (
    EXIT_CONFIG,
    EXIT_FAIL,
    EXIT_OK,
    THREADS_ENV,
    ConfigError,
    RunConfig,
    _aggregate,
    classify_lines,
    dumps,
    run,
    verification_checks,
)
from canalqc.fixtures import DEMOS, demo_spec
from canalqc.qclab import Tolerances

CONFIGS = Path(__file__).resolve().parent.parent / "configs"


def write_config(tmp_path, text, name="run.conf"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


def records(path):
    return [json.loads(line) for line in Path(path).read_text().splitlines()]


ELLIPTIC = (CONFIGS / "elliptic.conf").read_text()


# --- configuration


@pytest.mark.parametrize("name", list(DEMOS))
def test_shipped_configs_match_fixtures(name):
    cfg = RunConfig.load(CONFIGS / f"{name}.conf")
    spec, ref = cfg.spec(), demo_spec(name)
    assert spec.kind == ref.kind and spec.s_domain == ref.s_domain
    assert [c.source for c in spec.center] == [c.source for c in ref.center]
    assert spec.radius.source == ref.radius.source


def test_missing_key_is_config_error(tmp_path, capsys):
    text = "\n".join(line for line in ELLIPTIC.splitlines() if not line.startswith("radius"))
    code = run(["construct", "--config", write_config(tmp_path, text)])
    assert code == EXIT_CONFIG
    assert "radius" in capsys.readouterr().err


def test_unknown_key_rejected(tmp_path):
    with pytest.raises(ConfigError, match="colour"):
        RunConfig.from_text(ELLIPTIC + "colour = blue\n")


def test_expression_error_reported(tmp_path, capsys):
    code = run(["construct", "--config", write_config(tmp_path, ELLIPTIC.replace("s^2", "s^^2"))])
    assert code == EXIT_CONFIG
    assert "offset" in capsys.readouterr().err


def test_unknown_tolerance(tmp_path, capsys):
    code = run(["construct", "--config", write_config(tmp_path, ELLIPTIC), "--tol", "nope=1"])
    assert code == EXIT_CONFIG


# --- construct


def test_construct_elliptic(tmp_path):
    out = tmp_path / "grid.jsonl"
    assert run(["construct", "--config", str(CONFIGS / "elliptic.conf"), "--out", str(out)]) == EXIT_OK
    rows = records(out)
    assert len(rows) == 81
    assert rows[0]["index"] == [0, 0, 0, 0] and rows[-1]["index"] == [2, 2, 2, 2]
    assert set(rows[0]) == {"index", "params", "position", "center", "radius"}


def test_construct_rejects_bad_euclidean_profile(tmp_path, capsys):
    text = "ambient = euclidean\nkind = euclidean\ncenter = s, 0, 0, 0, 0\nradius = s^2\ns_domain = 0.9, 1.1\n"
    assert run(["construct", "--config", write_config(tmp_path, text)]) == EXIT_CONFIG
    assert "R'^2 < 1" in capsys.readouterr().err


def test_construct_threads_are_deterministic(tmp_path, monkeypatch):
    a, b = tmp_path / "a.jsonl", tmp_path / "b.jsonl"
    conf = str(CONFIGS / "hyperbolic.conf")
    assert run(["construct", "--config", conf, "--out", str(a), "--threads", "1"]) == EXIT_OK
    monkeypatch.setenv(THREADS_ENV, "4")
    assert run(["construct", "--config", conf, "--out", str(b)]) == EXIT_OK
    assert a.read_bytes() == b.read_bytes()


def test_bad_thread_env(tmp_path, monkeypatch):
    monkeypatch.setenv(THREADS_ENV, "many")
    assert run(["construct", "--config", str(CONFIGS / "elliptic.conf"), "--out", str(tmp_path / "x")]) == EXIT_CONFIG


def test_console_entry_point(tmp_path):
    out = tmp_path / "grid.jsonl"
    proc = subprocess.run(
        [sys.executable, "-m", "canalqc.cli", "construct", "--config", str(CONFIGS / "parabolic.conf"), "--out", str(out)],
        capture_output=True,
        text=True,
        check=False,
    )
    assert proc.returncode == 0, proc.stderr
    assert len(out.read_text().splitlines()) == 81


# --- analyze


def test_analyze_elliptic_end_to_end(tmp_path):
    out = tmp_path / "report.jsonl"
    assert run(["analyze", "--config", str(CONFIGS / "elliptic.conf"), "--out", str(out)]) == EXIT_OK
    rows = records(out)
    assert len(rows) == 82
    agg = rows[-1]
    assert agg["aggregate"] and agg["verdicts"]["qc"] and agg["verdicts"]["class"] == 2
    mid = next(g for g in agg["generators"] if g["s"] == 1.0)
    assert mid["a"] == pytest.approx(-1.0, abs=1e-8)
    assert rows[0]["label"] == "canal" and rows[0]["flags"] == []


@pytest.mark.parametrize("name, label", [("hyperbolic", 3), ("null_cubic", 4), ("parabolic", 4), ("euclidean", 1)])
def test_analyze_class_verdicts(grid_of, name, label):
    agg = _aggregate(demo_spec(name), Tolerances(), grid_of(name))
    assert agg["verdicts"]["class"] == label
    assert agg["verdicts"]["qc"] and agg["verdicts"]["gauss"] and agg["verdicts"]["conformally_flat"]


def test_floats_use_seventeen_digits():
    assert dumps({"x": 0.1, "y": float("nan"), "z": [1.0, 2]}) == '{"x": 0.10000000000000001, "y": null, "z": [1, 2]}'


# --- verify


def test_verify_rotational_elliptic(tmp_path):
    out = tmp_path / "verify.jsonl"
    assert run(["verify", "--config", str(CONFIGS / "elliptic.conf"), "--out", str(out)]) == EXIT_OK
    rows = records(out)
    names = [r["check"] for r in rows[:-1]]
    assert "subprojective" in names and "codazzi" in names
    assert rows[-1]["passed"] and rows[-1]["failed"] == []


@pytest.mark.parametrize("name", ["hyperbola_center", "circle_center", "null_cubic"])
def test_verify_non_rotational_fails_only_subprojectivity(grid_of, name):
    checks = verification_checks(demo_spec(name), Tolerances(), grid_of(name))
    failed = [c["check"] for c in checks if not c["passed"]]
    assert failed == ["subprojective"]


def test_verify_corrupted_fixture(tmp_path):
    out = tmp_path / "verify.jsonl"
    code = run(["verify", "--config", str(CONFIGS / "corrupted_b.conf"), "--out", str(out)])
    assert code == EXIT_FAIL
    assert "codazzi" in records(out)[-1]["failed"]


# --- classify


def test_classify_shipped_spectra(tmp_path):
    out = tmp_path / "labels.jsonl"
    assert run(["classify", "--config", str(CONFIGS / "classify.conf"), "--out", str(out)]) == EXIT_OK
    labels = [r["label"] for r in records(out)]
    assert labels == ["hyperplane", "hypersphere", "developable", "canal", "not_conformally_flat"]


def test_classify_empty_file(tmp_path):
    (tmp_path / "empty.jsonl").write_text("")
    conf = write_config(tmp_path, "spectra = empty.jsonl\n")
    out = tmp_path / "labels.jsonl"
    assert run(["classify", "--config", conf, "--out", str(out)]) == EXIT_OK
    assert out.read_text() == ""


def test_classify_malformed_line_names_line_number():
    with pytest.raises(ConfigError, match="line 2"):
        classify_lines(["[0, 0, 0, 0]", "[0, 0, oops]"], Tolerances())
    with pytest.raises(ConfigError, match="line 1"):
        classify_lines(['{"spectrum": "abc"}'], Tolerances())


def test_classify_accepts_records():
    out = classify_lines(['{"spectrum": [0.5, 0.5, 0.5, 0.5]}'], Tolerances())
    assert json.loads(out[0])["label"] == "hypersphere"
