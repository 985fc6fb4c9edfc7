import json

import pytest

from sbmech.cli import main
from sbmech.config import EXPERIMENTS

SMALL_PLATE = """\
[experiment]
name = plate_hole

[grid]
ncells = 32
half_width = 4

[driver]
eps_list = 1.0, 0.5
"""


def _write(tmp_path, text, name="c.ini"):
    p = tmp_path / name
    p.write_text(text)
    return str(p)


def test_list_experiments(capsys):
    assert main(["list-experiments"]) == 0
    lines = capsys.readouterr().out.strip().splitlines()
    assert [ln.split()[0] for ln in lines] == list(EXPERIMENTS)
    assert len(lines) == 6


def test_validate_good_and_bad(tmp_path, capsys):
    assert main(["validate", _write(tmp_path, SMALL_PLATE)]) == 0
    bad = _write(tmp_path, SMALL_PLATE + "sigma_inf = 1\nsigma_inf = 2\n", "bad.ini")
    assert main(["validate", bad]) == 1
    err = capsys.readouterr().err
    assert "bad.ini:11:" in err and "duplicate key" in err


def test_validate_negative_eps_names_key(tmp_path, capsys):
    p = _write(tmp_path, "[experiment]\nname = void_plasticity\n[geometry]\neps = -0.4\n")
    assert main(["validate", p]) == 1
    assert "'eps'" in capsys.readouterr().err


def test_usage_errors_map_to_config_exit(tmp_path):
    assert main(["run"]) == 1
    assert main(["run", _write(tmp_path, SMALL_PLATE), "--threads", "0"]) == 1
    assert main(["validate", str(tmp_path / "missing.ini")]) == 1


def test_run_plate_hole_writes_outputs(tmp_path):
    out = tmp_path / "run"
    code = main(["run", _write(tmp_path, SMALL_PLATE), "--output-dir", str(out), "--snapshot-every", "1"])
    assert code == 0
    assert (out / "config.ini").read_text() == SMALL_PLATE
    header = (out / "errors.csv").read_text().splitlines()[0]
    assert header.startswith("eps,err_xx,err_yy,err_xy")
    assert (out / "field_eps_1.vtk").exists() and (out / "field_eps_0p5.vtk").exists()
    assert (out / "probe_eps_1.csv").exists()
    summary = json.loads((out / "summary.json").read_text())
    assert summary["converged"] is True and summary["experiment"] == "plate_hole"


def test_run_reports_nonconvergence(tmp_path):
    text = SMALL_PLATE + "\n[solver]\nmax_iter = 1\n"
    assert main(["run", _write(tmp_path, text), "--output-dir", str(tmp_path / "r")]) == 2
    assert json.loads((tmp_path / "r" / "summary.json").read_text())["converged"] is False


def test_run_is_deterministic_across_thread_counts(tmp_path):
    cfg = _write(tmp_path, SMALL_PLATE)
    texts = []
    for n in (1, 2):
        out = tmp_path / f"t{n}"
        assert main(["run", cfg, "--output-dir", str(out), "--threads", str(n)]) == 0
        texts.append((out / "errors.csv").read_bytes())
    assert texts[0] == texts[1]


@pytest.mark.parametrize(
    "text,files",
    [
        ("[experiment]\nname = jacobi_demo\n[grid]\nncells = 8\n[driver]\ncell_sweeps = 50\n", ["history.csv"]),
        (
            "[experiment]\nname = fracture_mode_i\n[grid]\nncells = 16\n[driver]\nnsteps = 2\n",
            ["history.csv", "final.vtk"],
        ),
        (
            "[experiment]\nname = topopt_cantilever\n[grid]\nnx = 8\nny = 8\n[driver]\nt_end = 0.003\n",
            ["history.csv", "final.vtk"],
        ),
        (
            "[experiment]\nname = void_plasticity\n[grid]\nncells = 8\n[geometry]\nvoids = r1\n"
            "[driver]\npeak = 0.008\n",
            ["hysteresis_r1.csv", "r1_final.vtk"],
        ),
    ],
)
def test_other_runners_smoke(tmp_path, text, files):
    out = tmp_path / "o"
    assert main(["run", _write(tmp_path, text), "--output-dir", str(out)]) == 0
    for f in files:
        assert (out / f).exists(), f


def test_shipped_configs_validate():
    from pathlib import Path

    shipped = sorted((Path(__file__).parents[1] / "configs").glob("*.ini"))
    assert len(shipped) == len(EXPERIMENTS)
    for p in shipped:
        assert main(["validate", str(p)]) == 0, p
