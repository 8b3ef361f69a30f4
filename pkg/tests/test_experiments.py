import json
import math
import subprocess
import sys

import pytest

from uncertainty_lab.bounds import polynomial_scaling_fit
from uncertainty_lab.cli import main
from uncertainty_lab.experiments import derive_seed, emit_plot_data, read_csv


def write(tmp_path, text, name="c.toml"):
    p = tmp_path / name
    p.write_text(text)
    return p


def body(path):
    return "".join(ln for ln in path.read_text().splitlines(keepends=True) if not ln.startswith("#"))


CONC_FULL = """kind = "concentration"
seed = 1
[geometry]
d = 1
L = 4
[set]
type = "full"
[band]
b = 1.0
"""

TURAN = """kind = "lemma-suite"
seed = 5
[run]
lemmas = ["turan"]
instances = 1000
"""

GAMMA = """kind = "gamma-sweep"
seed = 3
[geometry]
d = 1
L = 8
[set]
type = "thick"
a = 3.141592653589793
sequence = "seeded-random"
[band]
sides = 0.954929658551372
[run]
gammas = [0.05, 0.1, 0.15, 0.2, 0.25, 0.3, 0.35, 0.4, 0.45, 0.5]
"""

SCALE = """kind = "scale-sweep"
[geometry]
d = 1
[set]
type = "thick"
gamma = 0.25
a = 6.283185307179586
[band]
sides = 3.0
[run]
L_list = [1, 2, 4]
"""


def test_derive_seed_scheme():
    import zlib

    import numpy as np

    expect = int(np.random.SeedSequence([7, zlib.crc32(b"turan"), 3]).generate_state(1)[0])
    assert derive_seed(7, "turan", 3) == expect
    assert derive_seed(7, "turan", 3) != derive_seed(7, "remez", 3)


def test_concentration_full_torus(tmp_path):
    cfg = write(tmp_path, CONC_FULL)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 0
    summary = json.loads((tmp_path / "o" / "summary.json").read_text())
    assert summary["lambda_min"] == [1.0] and summary["exit_code"] == 0
    header, rows = read_csv(tmp_path / "o" / "concentration.csv")
    assert rows[0][header.index("lambda_min")] == "1.0"
    assert list((tmp_path / "o").glob("concentration_*.txt"))


def test_csv_dialect(tmp_path):
    cfg = write(tmp_path, CONC_FULL)
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
    raw = (tmp_path / "o" / "concentration.csv").read_bytes()
    assert b"\r" not in raw and b'"' not in raw
    first = raw.split(b"\n", 1)[0]
    assert first.startswith(b"# uncertainty-lab concentration")


def test_lemma_suite_rerun_identical(tmp_path):
    cfg = write(tmp_path, TURAN)
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")]) == 0
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "b"), "--jobs", "3"]) == 0
    a, b = body(tmp_path / "a" / "lemma-suite.csv"), body(tmp_path / "b" / "lemma-suite.csv")
    assert a == b and a.count("\n") == 1001


def test_seed_env_changes_output(tmp_path, monkeypatch):
    cfg = write(tmp_path, TURAN.replace("1000", "5"))
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "a")])
    monkeypatch.setenv("UNCERTAINTY_LAB_SEED", "6")
    main(["run", "--config", str(cfg), "--out", str(tmp_path / "b")])
    assert body(tmp_path / "a" / "lemma-suite.csv") != body(tmp_path / "b" / "lemma-suite.csv")


def test_gamma_sweep_pipeline_oracle(tmp_path):
    cfg = write(tmp_path, GAMMA)
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    header, rows = read_csv(out / "gamma-sweep.csv")
    gammas = [float(r[header.index("gamma")]) for r in rows]
    lams = [float(r[header.index("lambda_min")]) for r in rows]
    fit = polynomial_scaling_fit(gammas, lams)
    summary = json.loads((out / "summary.json").read_text())
    assert summary["fit"]["slope"] == fit.slope and summary["fit"]["max_residual"] == fit.max_residual
    [dat] = emit_plot_data(out / "summary.json", tmp_path / "plots")
    lines = dat.read_text().splitlines()
    expect = [f"{r[header.index('log_inv_gamma')]} {r[header.index('log_inv_lambda')]}" for r in rows]
    assert lines == expect
    for line, g, lam in zip(lines, gammas, lams):
        x, y = map(float, line.split())
        assert x == math.log(1 / g) and y == math.log(1 / lam)


def test_scale_sweep_plot_rows(tmp_path):
    cfg = write(tmp_path, SCALE)
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["plot-data", "--report", str(out / "summary.json"), "--out", str(tmp_path / "p")]) == 0
    lines = (tmp_path / "p" / "scale_sweep.dat").read_text().splitlines()
    assert len(lines) == 3 and all(len(ln.split()) == 2 for ln in lines)


def test_empty_lemma_suite(tmp_path):
    cfg = write(tmp_path, TURAN.replace("1000", "0"))
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 0
    assert main(["plot-data", "--report", str(out / "summary.json"), "--out", str(tmp_path / "p")]) == 0
    assert (tmp_path / "p" / "lemma_slack.dat").read_text() == ""


def test_missing_report(tmp_path, capsys):
    assert main(["plot-data", "--report", str(tmp_path / "none.json"), "--out", str(tmp_path)]) == 1
    assert "does not exist" in capsys.readouterr().err


def test_failing_instance_exits_2(tmp_path):
    cfg = write(tmp_path, CONC_FULL.replace("concentration", "thm7").replace('type = "full"', 'type = "full"\na = 1.0')
                + "[constants]\nc = 0.1\n")
    out = tmp_path / "o"
    assert main(["run", "--config", str(cfg), "--out", str(out)]) == 2
    summary = json.loads((out / "summary.json").read_text())
    assert summary["failures"] == 1 and summary["exit_code"] == 2


def test_config_error_exits_1(tmp_path, capsys):
    cfg = write(tmp_path, CONC_FULL.replace("d = 1", "d = 5"))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "geometry.d" in capsys.readouterr().err
    assert not (tmp_path / "o").exists()


def test_runtime_precondition_names_field(tmp_path, capsys):
    cfg = write(tmp_path, CONC_FULL.replace("b = 1.0", "sides = 0.05\ncenters = [[0.1]]"))
    assert main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")]) == 1
    assert "band" in capsys.readouterr().err


def test_bad_jobs(tmp_path):
    cfg = write(tmp_path, CONC_FULL)
    assert main(["run", "--config", str(cfg), "--jobs", "0"]) == 1


def test_module_entry_point(tmp_path):
    cfg = write(tmp_path, CONC_FULL)
    res = subprocess.run([sys.executable, "-m", "uncertainty_lab", "run", "--config", str(cfg), "--out",
                          str(tmp_path / "o")], capture_output=True, text=True)
    assert res.returncode == 0, res.stderr


@pytest.mark.parametrize("name", ["concentration_full", "thm7_thick", "thm11_two_boxes", "scale_sweep",
                                  "gamma_sweep", "shell_cover"])
def test_sample_configs_run(name, tmp_path):
    from pathlib import Path

    cfg = Path(__file__).resolve().parent.parent / "configs" / f"{name}.toml"
    code = main(["run", "--config", str(cfg), "--out", str(tmp_path / "o")])
    # the shell-cover bound is known not to hold for E > 4
    assert code == (2 if name == "shell_cover" else 0)
