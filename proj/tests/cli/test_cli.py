import json
import math
import os
import subprocess
import time
from pathlib import Path

import pytest

CLI = os.environ.get("LODGPE_CLI", "lodgpe")
PRESETS = Path(os.environ.get("LODGPE_PRESETS", Path(__file__).resolve().parents[2] / "presets"))

UNIT_SQUARE = """
[domain]
xmin = 0
xmax = 1
ymin = 0
ymax = 1

[potential]
kind = constant
value = 0

[model]
beta = 0

[flow]
tol_energy = 1e-13
tol_residual = 1e-11
initial_guess = constant

[study]
fine_h = 1/64
H = 1/4, 1/8

[solve]
space = fine_fem
"""


def run(*args, cwd):
    return subprocess.run([CLI, *map(str, args)], cwd=cwd, capture_output=True, text=True)


@pytest.fixture
def square_cfg(tmp_path):
    p = tmp_path / "square.cfg"
    p.write_text(UNIT_SQUARE)
    return p


def test_linear_solve_matches_dirichlet_eigenvalue(tmp_path, square_cfg):
    r = run("solve", "--config", square_cfg, "--out", "out", cwd=tmp_path)
    assert r.returncode == 0, r.stderr
    manifest = json.loads((tmp_path / "out" / "manifest.json").read_text())
    lam = manifest["result"]["eigenvalue"]
    assert abs(lam - 2 * math.pi**2) / (2 * math.pi**2) < 0.01
    assert manifest["result"]["converged"]
    assert manifest["command"] == "solve"


def test_missing_config_is_a_usage_error(tmp_path):
    r = run("solve", "--config", "does_not_exist.cfg", cwd=tmp_path)
    assert r.returncode == 1
    assert "does_not_exist.cfg" in r.stderr


def test_bad_override_and_unknown_key(tmp_path, square_cfg):
    assert run("solve", "--config", square_cfg, "model.beat=1", cwd=tmp_path).returncode == 1
    assert run("solve", "--config", square_cfg, "nonsense", cwd=tmp_path).returncode == 1
    assert run("solve", "--config", square_cfg, "--relative", "--absolute", cwd=tmp_path).returncode == 1


def test_overrides_are_recorded(tmp_path, square_cfg):
    r = run("solve", "--config", square_cfg, "--out", "o", "study.fine_h=1/16", "solve.write_mesh=true",
            cwd=tmp_path)
    assert r.returncode == 0, r.stderr
    m = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert "study.fine_h=1/16" in m["overrides"]
    assert "fine_h = 0.0625" in m["resolved_config"]
    assert m["result"]["fine_dofs"] == 15 * 15
    assert (tmp_path / "o" / "mesh.txt").exists()
    assert (tmp_path / "o" / "resolved.cfg").read_text() == m["resolved_config"]


def test_smoke_preset_study(tmp_path):
    t0 = time.monotonic()
    r = run("study", "--config", PRESETS / "smoke.cfg", "--out", "s", "--plot", "--no-cache", cwd=tmp_path)
    elapsed = time.monotonic() - t0
    assert r.returncode == 0, r.stderr
    assert elapsed < 10
    out = tmp_path / "s"
    lines = (out / "study.csv").read_text().splitlines()
    assert lines[0] == "H,err_h1,err_l2,err_energy,err_eigenvalue,iters,wall_time_s"
    assert len(lines) == 4 and lines[-1].startswith("# rate_h1=")
    assert (out / "baseline.csv").exists()
    assert (out / "study.gp").exists()
    m = json.loads((out / "manifest.json").read_text())
    assert m["valid"]
    assert "study.use_cache=false" in m["overrides"]
    assert len(m["rows"]) == 2 and all(row["ok"] for row in m["rows"])
    for lod, p1 in zip(m["rows"], m["baseline_rows"]):
        assert lod["err_h1"] < p1["err_h1"]
    assert not (tmp_path / ".lodgpe_cache").exists()


def test_solution_file(tmp_path):
    r = run("solve", "--config", PRESETS / "smoke.cfg", "--out", "w", "--no-cache", cwd=tmp_path)
    assert r.returncode == 0, r.stderr
    rows = [list(map(float, line.split())) for line in (tmp_path / "w" / "solution.txt").read_text().splitlines()]
    assert len(rows) == 33 * 33
    assert all(len(row) == 3 for row in rows)
    boundary = [v for x, y, v in rows if abs(abs(x) - 4) < 1e-12 or abs(abs(y) - 4) < 1e-12]
    assert boundary and all(v == 0.0 for v in boundary)


def test_corrector_cache_reuse_and_repair(tmp_path):
    args = ("correctors", "--config", PRESETS / "smoke.cfg", "--cache-dir", "cache", "--out", "c")
    first = run(*args, cwd=tmp_path)
    assert first.returncode == 0, first.stderr
    m1 = json.loads((tmp_path / "c" / "manifest.json").read_text())
    assert m1["cache"]["misses"] == 2 and m1["cache"]["hits"] == 0

    second = run(*args, cwd=tmp_path)
    assert second.returncode == 0
    m2 = json.loads((tmp_path / "c" / "manifest.json").read_text())
    assert m2["cache"]["hits"] == 2

    victim = Path(tmp_path / m2["cache"]["entries"][0]["file"])
    data = bytearray(victim.read_bytes())
    data[-5] ^= 0xFF
    victim.write_bytes(bytes(data))
    third = run(*args, cwd=tmp_path)
    assert third.returncode == 0
    assert "warning" in third.stderr and "corrupt" in third.stderr
    m3 = json.loads((tmp_path / "c" / "manifest.json").read_text())
    assert m3["cache"]["hits"] == 1 and m3["cache"]["misses"] == 1
    assert run(*args, cwd=tmp_path).returncode == 0
    assert json.loads((tmp_path / "c" / "manifest.json").read_text())["cache"]["hits"] == 2


def test_version_flag(tmp_path):
    r = run("--version", cwd=tmp_path)
    assert r.returncode == 0
    assert r.stdout.strip()
