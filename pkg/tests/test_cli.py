import csv
import json
import subprocess
import sys

import numpy as np
import pytest

from tuckervie.assembly import VoxelGrid
from tuckervie.cli import DEFAULTS, main
from tuckervie.io import load_tensors, save_scene
from tuckervie.mie import MieSphere, mie_absorbed_power
from tuckervie.solver import DielectricMap


def write_cfg(path, **kw):
    path.write_text(json.dumps({"schema": 1, **kw}))
    return path


def rows(path):
    with open(path) as f:
        return list(csv.DictReader(f))


def test_mie_command(tmp_path, capsys):
    assert main(["mie", "--out", str(tmp_path)]) == 0
    out = json.loads((tmp_path / "mie.json").read_text())
    assert out["p_abs"] == pytest.approx(mie_absorbed_power(MieSphere.from_properties(0.15, 65, 0.6, 298e6)))
    assert json.loads(capsys.readouterr().out)["l_max"] == 7
    man = json.loads((tmp_path / "manifest.json").read_text())
    assert man["command"] == "mie" and man["outputs"] == ["mie.json"] and man["converged"] is True
    assert man["config"] == DEFAULTS["mie"]


def test_assemble_command(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", dims=[3, 2, 2], operators=["N"])
    assert main(["assemble", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    tensors, manifest = load_tensors(tmp_path / "o" / "tensors" / "manifest.json")
    assert len(tensors) == 6 and manifest["grid"]["dims"] == [3, 2, 2]


def test_rank_sweep_small(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", frequencies_ghz=[0.3, 0.6], edge=0.5)
    assert main(["rank-sweep", "--config", str(cfg), "--out", str(tmp_path)]) == 0
    r = rows(tmp_path / "ranks.csv")
    assert [float(x["frequency_ghz"]) for x in r] == [0.3, 0.6]
    assert int(r[1]["max_rank"]) >= int(r[0]["max_rank"])


def test_compress_report_deterministic(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", dims=[6, 6, 6], tolerances=[1e-4], rules=["energy"], cp_iters=50)
    for name in ("a", "b"):
        assert main(["compress-report", "--config", str(cfg), "--out", str(tmp_path / name)]) == 0
    a = (tmp_path / "a" / "compression.csv").read_bytes()
    assert a == (tmp_path / "b" / "compression.csv").read_bytes()
    r = rows(tmp_path / "a" / "compression.csv")
    assert len(r) == 1 and r[0]["components"] == "9"
    assert float(r[0]["max_rel_error"]) <= 1e-4


def test_matvec_bench_small(tmp_path):
    cfg = write_cfg(tmp_path / "c.json", sizes=[8], rank=3, repetitions=1)
    assert main(["matvec-bench", "--config", str(cfg), "--out", str(tmp_path), "--strategy", "tuckercp-loop"]) == 0
    r = rows(tmp_path / "bench.csv")
    assert [x["strategy"] for x in r] == ["tuckercp-loop"]
    assert float(r[0]["product_ms"]) > 0


@pytest.fixture
def scene(tmp_path):
    grid = VoxelGrid((4, 4, 4), (0.01,) * 3, (0, 0, 0))
    eps = np.ones(grid.dims)
    sig = np.zeros(grid.dims)
    eps[1:3, 1:3, 1:3], sig[1:3, 1:3, 1:3] = 50.0, 0.5
    path = tmp_path / "scene.json"
    save_scene(path, grid, DielectricMap.from_properties(eps, sig, 298e6))
    return path


def test_solve_command(tmp_path, scene):
    cfg = write_cfg(tmp_path / "c.json", scene=str(scene))
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o"), "--strategy", "hosvd"]) == 0
    rep = json.loads((tmp_path / "o" / "report.json").read_text())
    assert rep["converged"] and rep["strategy"] == "hosvd-decompress" and rep["absorbed_power_W"] > 0
    assert (tmp_path / "o" / "p_abs.raw").stat().st_size == 64 * 8


def test_nonconvergence_exit_code(tmp_path, scene):
    cfg = write_cfg(tmp_path / "c.json", scene=str(scene), gmres={"tol": 1e-14, "inner": 2, "outer": 1},
                    write_volumes=False)
    assert main(["solve", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 2
    man = json.loads((tmp_path / "o" / "manifest.json").read_text())
    assert man["converged"] is False


def test_input_errors(tmp_path):
    assert main(["mie", "--config", str(write_cfg(tmp_path / "a.json", bogus=1)), "--out", str(tmp_path)]) == 1
    bad = tmp_path / "b.json"
    bad.write_text(json.dumps({"schema": 9}))
    assert main(["mie", "--config", str(bad), "--out", str(tmp_path)]) == 1
    assert main(["mie", "--config", str(tmp_path / "missing.json"), "--out", str(tmp_path)]) == 1
    assert main(["solve", "--out", str(tmp_path)]) == 1
    assert main(["matvec-bench", "--strategy", "fast", "--out", str(tmp_path)]) == 1
    assert main(["mie", "--config", str(write_cfg(tmp_path / "c.json", radius=-1)), "--out", str(tmp_path)]) == 1


def test_parser_errors_exit_one():
    with pytest.raises(SystemExit) as exc:
        main(["no-such-command"])
    assert exc.value.code == 1
    with pytest.raises(SystemExit) as exc:
        main(["mie", "--seed", "abc"])
    assert exc.value.code == 1


def test_console_entry_point(tmp_path):
    proc = subprocess.run([sys.executable, "-m", "tuckervie.cli", "mie", "--out", str(tmp_path)],
                          capture_output=True, text=True)
    assert proc.returncode == 0
    assert "p_abs" in proc.stdout
