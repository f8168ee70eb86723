import csv
import json
import math
import subprocess
import sys
from pathlib import Path

import pytest

from covphase.cli import COMMANDS, EXIT_BUDGET, EXIT_CONFIG, EXIT_OK, EXIT_VALIDATION, emit_plot_data, main
from covphase.errors import IoError

ROOT = Path(__file__).resolve().parents[1]
CONFIGS = ROOT / "configs"
GOLDEN = Path(__file__).resolve().parent / "golden"

NON_PSD = {"blocks": [[[[1, 0]]], [[[1, 0], [2, 0]], [[2, 0], [1, 0]]]]}


def _run(config: Path, out: Path, *extra: str) -> int:
    return main(["--config", str(config), "--out", str(out), *extra])


def _tree(d: Path) -> dict[str, bytes]:
    return {p.name: p.read_bytes() for p in sorted(d.iterdir())}


def _write(tmp_path: Path, cfg: dict) -> Path:
    p = tmp_path / "config.json"
    p.write_text(json.dumps(cfg))
    return p


def test_every_command_has_a_config_and_golden():
    assert sorted(p.stem for p in CONFIGS.glob("*.json")) == sorted(COMMANDS)
    assert sorted(p.name for p in GOLDEN.iterdir() if p.is_dir()) == sorted(COMMANDS)


@pytest.mark.parametrize("command", COMMANDS)
def test_golden_and_thread_determinism(command, tmp_path):
    cfg = CONFIGS / f"{command}.json"
    outs = {}
    for label, threads in (("a", "1"), ("b", "1"), ("c", "8")):
        assert _run(cfg, tmp_path / label, "--threads", threads) == EXIT_OK
        outs[label] = _tree(tmp_path / label)
    golden = _tree(GOLDEN / command)
    assert outs["a"] == golden
    assert outs["b"] == golden
    assert outs["c"] == golden


def test_console_entry_point(tmp_path):
    res = subprocess.run([sys.executable, "-m", "covphase", "--config", str(CONFIGS / "prob.json"),
                          "--out", str(tmp_path)], capture_output=True)
    assert res.returncode == 0, res.stderr
    assert (tmp_path / "prob.csv").read_bytes() == (GOLDEN / "prob" / "prob.csv").read_bytes()


# ------------------------------------------------------------------ golden contents


def _rows(path: Path) -> list[dict]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def test_validate_canonical_passes():
    rep = json.loads((GOLDEN / "validate" / "report.json").read_text())
    assert rep["passed"] and rep["S"] == 10 and rep["violations"] == []


def test_prob_vacuum_half():
    rows = _rows(GOLDEN / "prob" / "prob.csv")
    half = [r for r in rows if json.loads(r["set"]) == [[0.0, math.pi]]]
    assert float(half[0]["probability"]) == 0.5


def test_factorize_example2_witness():
    rep = json.loads((GOLDEN / "factorize" / "report.json").read_text())
    assert rep["result"] == "NotFactorizable"
    w = rep["witness"]
    assert w["order"] == 1 and w["mismatch"] > 1.0
    assert len(w["quadruples"]) == 4


def test_spectrum_sector_three():
    rows = [r for r in _rows(GOLDEN / "spectrum" / "spectrum.csv") if r["sector"] == "3"]
    assert [int(r["r"]) for r in rows] == [0, 1, 2, 3]
    for r in rows:
        assert float(r["phase"]) == pytest.approx(2 * math.pi * int(r["r"]) / 4, abs=1e-13)


def test_density_rows():
    cfg = json.loads((CONFIGS / "density.json").read_text())
    text = (GOLDEN / "density" / "density.csv").read_text()
    assert text.count("\n") == cfg["nodes"] + 1
    assert text.splitlines()[0] == "theta,value"


def test_classical_limit_rows():
    rows = _rows(GOLDEN / "classical-limit" / "classical-limit.csv")
    assert list(rows[0]) == ["amplitude", "distance"]
    d = [float(r["distance"]) for r in rows]
    assert len(d) == 4 and all(b < a for a, b in zip(d, d[1:]))


def test_dirac_limit_columns():
    rows = _rows(GOLDEN / "dirac-limit" / "dirac-limit.csv")
    assert list(rows[0]) == ["amplitude", "window_mass"]


# ---------------------------------------------------------------------- exit codes


def test_missing_config(tmp_path):
    assert _run(tmp_path / "absent.json", tmp_path / "o") == EXIT_CONFIG


def test_malformed_json(tmp_path):
    p = tmp_path / "c.json"
    p.write_text("{not json")
    assert _run(p, tmp_path / "o") == EXIT_CONFIG


def test_unknown_command(tmp_path):
    assert _run(_write(tmp_path, {"command": "plot"}), tmp_path / "o") == EXIT_CONFIG


def test_missing_field(tmp_path):
    cfg = {"command": "prob", "kernel": {"construct": "canonical", "S": 3}}
    assert _run(_write(tmp_path, cfg), tmp_path / "o") == EXIT_CONFIG


def test_missing_referenced_file(tmp_path):
    cfg = {"command": "validate", "kernel": "nowhere.json"}
    assert _run(_write(tmp_path, cfg), tmp_path / "o") == EXIT_CONFIG


def test_referenced_kernel_file(tmp_path):
    (tmp_path / "k.json").write_text(json.dumps({"construct": "canonical", "S": 4}))
    cfg = {"command": "validate", "kernel": "k.json"}
    assert _run(_write(tmp_path, cfg), tmp_path / "o") == EXIT_OK


def test_validation_failure(tmp_path):
    cfg = {"command": "validate", **NON_PSD}
    assert _run(_write(tmp_path, cfg), tmp_path / "o") == EXIT_VALIDATION
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert not rep["passed"] and rep["violations"]


def test_non_psd_kernel_rejected_before_use(tmp_path):
    cfg = {"command": "prob", "kernel": NON_PSD, "state": {"number": [0, 0]}, "X": [[0, 1]]}
    assert _run(_write(tmp_path, cfg), tmp_path / "o") == EXIT_VALIDATION
    assert not (tmp_path / "o").exists()


def test_budget_exceeded(tmp_path):
    cfg = json.loads((CONFIGS / "classical-limit.json").read_text())
    cfg["cutoff_budget"] = 20
    assert _run(_write(tmp_path, cfg), tmp_path / "o") == EXIT_BUDGET


def test_unwritable_output(tmp_path):
    blocker = tmp_path / "file"
    blocker.write_text("")
    assert _run(CONFIGS / "validate.json", blocker / "sub") == EXIT_CONFIG


# -------------------------------------------------------------------- CSV emission


def test_emit_format(tmp_path):
    p = emit_plot_data(tmp_path / "t.csv", {"x": [math.pi, 1, True], "label": ['a,"b"', "c", "d"]})
    raw = p.read_bytes()
    assert b"\r" not in raw
    lines = raw.decode().split("\n")
    assert lines[0] == "x,label"
    assert lines[1] == '3.14159265358979,"a,""b"""'
    assert lines[2:] == ["1,c", "true,d", ""]


def test_emit_unequal_columns(tmp_path):
    with pytest.raises(ValueError):
        emit_plot_data(tmp_path / "t.csv", {"a": [1, 2], "b": [1]})


def test_emit_io_error(tmp_path):
    with pytest.raises(IoError):
        emit_plot_data(tmp_path / "missing" / "t.csv", {"a": [1]})
