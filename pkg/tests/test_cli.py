import json
import shutil
import subprocess
import sys
from pathlib import Path

import pytest

from flatcore.cli import main, parse_config, validate_config
from flatcore.errors import ParseError, ValidationError
from flatcore.fieldio import atomic_open, read_field

CONFIGS = Path(__file__).resolve().parents[1] / "configs"
MINIMAL = {"exponents": {"alpha": 0.05, "beta": 0.1, "dim": 3},
           "domain": {"kind": "ball", "center": [0.0, 0.0, 0.0], "radius": 1.0},
           "grid": {"h": 0.125, "mirror": [0, 1, 2]}}


def write_cfg(tmp_path, data, name="cfg.json"):
    p = tmp_path / name
    p.write_text(json.dumps(data))
    return p


def with_(**extra):
    return dict(MINIMAL, **extra)


# ---------------------------------------------------------------- parsing

@pytest.mark.parametrize("path", sorted(CONFIGS.glob("*.json")), ids=lambda p: p.stem)
def test_example_configs_parse(path):
    parse_config(path, path.stem.replace("_", "-"))


def test_minimal_config_accepted():
    cfg = validate_config(MINIMAL, "lambda-star")
    assert cfg.exp.dim == 3 and cfg.h == 0.125 and cfg.mirror == (0, 1, 2)


def test_alpha_not_below_beta_names_both_keys():
    raw = with_(exponents={"alpha": 0.2, "beta": 0.1, "dim": 3})
    with pytest.raises(ValidationError) as ei:
        validate_config(raw)
    msg = " ".join(ei.value.violations)
    assert "exponents.alpha" in msg and "exponents.beta" in msg


def test_unknown_key_rejected():
    raw = with_(exponents={"alpha_": 0.05, "alpha": 0.05, "beta": 0.1, "dim": 3})
    with pytest.raises(ValidationError) as ei:
        validate_config(raw)
    assert any("exponents.alpha_" in v for v in ei.value.violations)


def test_all_violations_reported():
    raw = {"exponents": {"alpha": 2.0, "beta": 0.1, "dim": 0},
           "domain": {"kind": "ball", "center": [0.0], "radius": -1.0},
           "grid": {"h": -0.1}, "bogus": 1}
    with pytest.raises(ValidationError) as ei:
        validate_config(raw, "ground-state")
    v = " | ".join(ei.value.violations)
    for key in ("bogus", "exponents.alpha", "exponents.dim", "domain.radius", "grid.h", "lambda"):
        assert key in v, key


def test_required_blocks_per_subcommand():
    for sub, key in (("ground-state", "lambda"), ("branch", "lambda_grid"),
                     ("parabolic", "parabolic")):
        with pytest.raises(ValidationError) as ei:
            validate_config(MINIMAL, sub)
        assert any(v.startswith(key) for v in ei.value.violations)
    with pytest.raises(ValidationError):
        validate_config({"exponents": MINIMAL["exponents"]}, "fibering")


def test_lambda_grid_must_decrease():
    with pytest.raises(ValidationError):
        validate_config(with_(lambda_grid=[1.0, 2.0]), "branch")


def test_parse_errors(tmp_path):
    with pytest.raises(ParseError):
        parse_config(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(ParseError):
        parse_config(bad)


# ---------------------------------------------------------------- running

def test_fibering_report(tmp_path):
    out = tmp_path / "out"
    assert main(["fibering", "--config", str(CONFIGS / "fibering.json"), "--out", str(out)]) == 0
    rep = json.loads((out / "report.json").read_text())
    res = rep["result"]
    assert res["rayleigh"]["lambda_1P"] == pytest.approx(2.9513593968502349, rel=1e-12)
    assert res["roots"]["kind"] == "Pair"
    assert res["c_one_p_check"]["printed_rel_err"] > 0.1
    assert rep["config"] == json.loads((CONFIGS / "fibering.json").read_text())
    assert {"numpy", "scipy", "python", "flatcore"} <= set(rep["versions"])


def test_validation_exit_code(tmp_path, capsys):
    p = write_cfg(tmp_path, with_(exponents={"alpha": 0.2, "beta": 0.1, "dim": 3}))
    out = tmp_path / "out"
    assert main(["ground-state", "--config", str(p), "--out", str(out)]) == 2
    err = json.loads(capsys.readouterr().err)
    assert err["kind"] == "validation" and len(err["violations"]) >= 2
    assert json.loads((out / "error.json").read_text()) == err


def test_numerical_exit_code(tmp_path):
    # Far below every Nehari level: the projection of the seed has no root.
    p = write_cfg(tmp_path, with_(**{"lambda": 0.2}))
    out = tmp_path / "out"
    assert main(["ground-state", "--config", str(p), "--out", str(out)]) == 3
    err = json.loads((out / "error.json").read_text())
    assert err["kind"] == "numerical" and err["type"] == "NoRoot"


def test_threads_env(tmp_path, monkeypatch):
    p = write_cfg(tmp_path, with_(**{"lambda": 2.0}))
    monkeypatch.setenv("FLATCORE_THREADS", "1")
    assert main(["ground-state", "--config", str(p), "--out", str(tmp_path / "a")]) == 0
    monkeypatch.setenv("FLATCORE_THREADS", "zero")
    assert main(["ground-state", "--config", str(p), "--out", str(tmp_path / "b")]) == 2


def test_rerun_from_echo_is_bit_identical(tmp_path):
    p = write_cfg(tmp_path, with_(**{"lambda": 2.0}))
    a, b = tmp_path / "a", tmp_path / "b"
    assert main(["ground-state", "--config", str(p), "--out", str(a)]) == 0
    echo = json.loads((a / "report.json").read_text())["config"]
    p2 = write_cfg(tmp_path, echo, "echo.json")
    assert main(["ground-state", "--config", str(p2), "--out", str(b)]) == 0
    ra = json.loads((a / "report.json").read_text())
    rb = json.loads((b / "report.json").read_text())
    assert ra["result"] == rb["result"]
    assert (a / "ground_state.fld").read_bytes() == (b / "ground_state.fld").read_bytes()
    fld = read_field(a / "ground_state.fld")
    assert fld["values"].max() > 0


def test_h_study_writes_convergence_table(tmp_path):
    raw = with_(**{"lambda": 2.0})
    raw["grid"] = {"h": 0.25, "mirror": [0, 1, 2]}
    p = write_cfg(tmp_path, raw)
    out = tmp_path / "out"
    assert main(["ground-state", "--config", str(p), "--h-study", "--out", str(out)]) == 0
    lines = (out / "convergence.csv").read_text().splitlines()
    assert lines[0] == "h,energy" and len(lines) == 4
    assert all((out / f"h{k}" / "ground_state.fld").exists() for k in range(3))


def test_branch_csv(tmp_path):
    raw = with_(lambda_grid=[2.0, 1.7, 1.5])
    out = tmp_path / "out"
    assert main(["branch", "--config", str(write_cfg(tmp_path, raw)), "--out", str(out)]) == 0
    rows = (out / "branch.csv").read_text().splitlines()
    assert rows[0].startswith("lambda,energy") and len(rows) == 4


def test_atomic_write_leaves_nothing_on_failure(tmp_path):
    target = tmp_path / "x.json"
    target.write_text("old")
    with pytest.raises(RuntimeError):
        with atomic_open(target, "w") as fh:
            fh.write("partial")
            raise RuntimeError("boom")
    assert target.read_text() == "old"
    assert [p.name for p in tmp_path.iterdir()] == ["x.json"]


def test_console_script(tmp_path):
    exe = shutil.which("flatcore")
    cmd = [exe] if exe else [sys.executable, "-m", "flatcore.cli"]
    out = tmp_path / "out"
    proc = subprocess.run(cmd + ["fibering", "--config", str(CONFIGS / "fibering.json"),
                                 "--out", str(out)], capture_output=True, text=True)
    assert proc.returncode == 0, proc.stderr
    assert (out / "report.json").exists()
