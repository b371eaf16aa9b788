import csv
import subprocess
import sys

import pytest

from relgs.cli import (
    EXIT_CONFIG,
    EXIT_NOT_CONVERGED,
    EXIT_OK,
    EXIT_VERIFY,
    ConfigError,
    main,
    parse_config,
)
from relgs.fieldio import read_field
from relgs.spectral import Grid, ModelParams

MINIMAL = """\
# minimal solve
model.s = 0.5
model.m = 1
model.mu = 2
model.p = 3
model.N = 1
grid.n = 4096
grid.L = 80
"""

SMALL_SOLVE = """\
model.s = 0.5
model.m = 1
model.mu = 2
model.p = 3
grid.n = 512
grid.L = 40
"""


def write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return path


def read_summary(path):
    lines = path.read_text().splitlines()
    assert lines[0].startswith("# ")
    return list(csv.DictReader(lines[1:]))


class TestParseConfig:
    def test_minimal_solve(self):
        cfg = parse_config(MINIMAL, experiment="solve")
        assert cfg.model == ModelParams(s=0.5, m=1, mu=2, p=3, N=1)
        assert cfg.grid == Grid(4096, 80.0)
        assert cfg.experiment == "solve" and cfg.seed == 0

    def test_boundary_exponent_convention(self):
        cfg = parse_config(MINIMAL.replace("model.p = 3", "model.p = 7"), experiment="solve")
        assert cfg.model.p == 7

    def test_s_out_of_range(self):
        with pytest.raises(ConfigError, match=r"s in \(0,1\)"):
            parse_config(MINIMAL.replace("model.s = 0.5", "model.s = 1.5"), experiment="solve")

    def test_critical_exponent_reported(self):
        text = MINIMAL.replace("model.s = 0.5", "model.s = 0.25").replace("model.p = 3", "model.p = 5")
        with pytest.raises(ConfigError, match="2N/"):
            parse_config(text, experiment="solve")

    @pytest.mark.parametrize(
        "text,match",
        [
            (MINIMAL + "model.q = 1\n", "unknown key 'model.q'"),
            (MINIMAL + "model.s = 0.4\n", "duplicate key 'model.s'"),
            (MINIMAL + "just words\n", "expected 'key = value'"),
            (MINIMAL + "run.seed =\n", "empty value"),
            (MINIMAL.replace("model.mu = 2\n", ""), "missing required key model.mu"),
            (MINIMAL.replace("grid.n = 4096", "grid.n = four"), "grid.n"),
        ],
    )
    def test_errors_name_the_key(self, text, match):
        with pytest.raises(ConfigError, match=match):
            parse_config(text, experiment="solve")

    def test_missing_experiment(self):
        with pytest.raises(ConfigError, match="run.experiment"):
            parse_config(MINIMAL)

    def test_experiment_conflict(self):
        with pytest.raises(ConfigError, match="conflicts"):
            parse_config(MINIMAL + "run.experiment = sweep\n", experiment="solve")

    def test_continuation_mass_order(self):
        text = MINIMAL.replace("model.m = 1\n", "") + "run.m_values = 0.5, 1\n"
        with pytest.raises(ConfigError, match="strictly decreasing"):
            parse_config(text, experiment="continuation")

    def test_continuation_defaults(self):
        text = MINIMAL.replace("model.m = 1\n", "") + "run.m_values = 1, 0.5\n"
        cfg = parse_config(text, experiment="continuation")
        assert cfg.model.m == 1 and cfg.m_values == (1.0, 0.5)

    def test_box_heuristic(self, caplog):
        cfg = parse_config(MINIMAL.replace("grid.L = 80\n", ""), experiment="solve")
        assert cfg.grid.L == pytest.approx(40 / 2**0.5)
        assert "heuristic" in caplog.text

    def test_sweep_requires_param(self):
        with pytest.raises(ConfigError, match="sweep.param"):
            parse_config(MINIMAL, experiment="sweep")

    def test_sweep_values_validated(self):
        text = MINIMAL + "sweep.param = s\nsweep.values = 0.5, 1.2\n"
        with pytest.raises(ConfigError, match="s=1.2"):
            parse_config(text, experiment="sweep")

    def test_verify_extension_needs_no_model(self):
        cfg = parse_config("verify.s_values = 0.3\n", experiment="verify-extension")
        assert cfg.model is None and cfg.verify.s_values == (0.3,)

    def test_verify_kernel_needs_mass(self):
        with pytest.raises(ConfigError, match="m > 0"):
            parse_config(MINIMAL.replace("model.m = 1", "model.m = 0"), experiment="verify-kernel")

    def test_solver_keys(self):
        cfg = parse_config(MINIMAL + "solver.max_iters = 10\nsolver.init = tent\nrun.seed = 4\n",
                           experiment="solve")
        assert cfg.solver.max_iters == 10 and cfg.solver.init == "tent" and cfg.solver.seed == 4


class TestRun:
    def test_solve(self, tmp_path):
        cfg = write(tmp_path, SMALL_SOLVE)
        out = tmp_path / "out"
        assert main(["solve", "--config", str(cfg), "--output", str(out)]) == EXIT_OK
        rows = read_summary(out / "summary.csv")
        assert len(rows) == 1 and rows[0]["converged"] == "1" and rows[0]["one_signed"] == "1"
        field = read_field(out / "run_000" / "field.relgs")
        assert field.grid == Grid(512, 40.0)
        trace = (out / "run_000" / "trace.csv").read_text().splitlines()
        assert trace[0].startswith("iter,") and len(trace) > 2

    def test_deterministic_summary(self, tmp_path):
        cfg = write(tmp_path, SMALL_SOLVE + "solver.noise = 0.01\n")
        a, b = tmp_path / "a", tmp_path / "b"
        assert main(["solve", "--config", str(cfg), "--output", str(a), "--seed", "3"]) == EXIT_OK
        assert main(["solve", "--config", str(cfg), "--output", str(b), "--seed", "3"]) == EXIT_OK
        sa = (a / "summary.csv").read_text().splitlines()[1:]
        sb = (b / "summary.csv").read_text().splitlines()[1:]
        assert sa == sb

    def test_seed_changes_noisy_start(self, tmp_path):
        cfg = write(tmp_path, SMALL_SOLVE + "solver.noise = 0.05\nsolver.max_iters = 3\n")
        outs = []
        for seed in ("1", "2"):
            out = tmp_path / f"s{seed}"
            main(["solve", "--config", str(cfg), "--output", str(out), "--seed", seed])
            outs.append((out / "run_000" / "trace.csv").read_text())
        assert outs[0] != outs[1]

    def test_not_converged(self, tmp_path):
        cfg = write(tmp_path, SMALL_SOLVE + "solver.max_iters = 2\n")
        assert main(["solve", "--config", str(cfg), "--output", str(tmp_path / "o")]) == EXIT_NOT_CONVERGED

    def test_sweep(self, tmp_path):
        cfg = write(tmp_path, SMALL_SOLVE + "sweep.param = mu\nsweep.values = 1.5, 2.5\n")
        out = tmp_path / "out"
        assert main(["sweep", "--config", str(cfg), "--output", str(out), "--jobs", "2"]) == EXIT_OK
        rows = read_summary(out / "summary.csv")
        assert [float(r["mu"]) for r in rows] == [1.5, 2.5]
        assert float(rows[0]["c_m"]) < float(rows[1]["c_m"])

    def test_continuation(self, tmp_path):
        text = SMALL_SOLVE.replace("model.m = 1\n", "").replace("grid.L = 40", "grid.L = 80")
        text = text.replace("grid.n = 512", "grid.n = 1024") + "run.m_values = 1, 0.5\n"
        out = tmp_path / "out"
        assert main(["continuation", "--config", str(write(tmp_path, text)), "--output", str(out)]) == EXIT_OK
        rows = read_summary(out / "summary.csv")
        assert [r["run"] for r in rows] == ["run_000", "run_001", "run_limit_m0"]
        assert rows[-1]["kind"] != rows[0]["kind"]
        c = [float(r["c_m"]) for r in rows]
        assert c[0] < c[1] < c[2]
        assert (out / "run_001" / "field.relgs").exists()

    def test_bounds(self, tmp_path, capsys):
        text = "model.s = 0.5\nmodel.m = 0\nmodel.mu = 2\nmodel.p = 4\n"
        out = tmp_path / "out"
        assert main(["bounds", "--config", str(write(tmp_path, text)), "--output", str(out)]) == EXIT_OK
        assert "delta" in capsys.readouterr().out
        rows = read_summary(out / "summary.csv")
        assert float(rows[0]["delta"]) == pytest.approx(12005 / 972, rel=1e-13)

    def test_bounds_out_of_range(self, tmp_path, capsys):
        text = "model.s = 0.5\nmodel.m = 3\nmodel.mu = 2\nmodel.p = 4\n"
        cfg = write(tmp_path, text)
        assert main(["bounds", "--config", str(cfg), "--output", str(tmp_path / "o")]) == EXIT_CONFIG
        assert "mu/2" in capsys.readouterr().err

    def test_verify_extension(self, tmp_path):
        out = tmp_path / "out"
        cfg = write(tmp_path, "verify.s_values = 0.25, 0.5, 0.75\nverify.rho_values = 0.5, 1, 5\n")
        assert main(["verify-extension", "--config", str(cfg), "--output", str(out)]) == EXIT_OK
        rows = read_summary(out / "summary.csv")
        assert len(rows) == 9
        assert all(float(r["dn_rel_err"]) < 1e-6 and r["passed"] == "1" for r in rows)

    def test_verify_extension_failure(self, tmp_path):
        cfg = write(tmp_path, "verify.s_values = 0.3\nverify.rho_values = 2\nverify.tol = 1e-30\n")
        assert main(["verify-extension", "--config", str(cfg), "--output", str(tmp_path / "o")]) == EXIT_VERIFY

    def test_verify_kernel(self, tmp_path):
        text = SMALL_SOLVE.replace("grid.n = 512", "grid.n = 2048")
        out = tmp_path / "out"
        assert main(["verify-kernel", "--config", str(write(tmp_path, text)), "--output", str(out)]) == EXIT_OK
        rows = read_summary(out / "summary.csv")
        assert len(rows) == 10 and max(float(r["rel_err"]) for r in rows) < 1e-3

    def test_verify_kernel_failure(self, tmp_path):
        text = SMALL_SOLVE.replace("grid.n = 512", "grid.n = 2048") + "kernel.tol = 1e-30\n"
        cfg = write(tmp_path, text)
        assert main(["verify-kernel", "--config", str(cfg), "--output", str(tmp_path / "o")]) == EXIT_VERIFY

    def test_malformed_config_exit(self, tmp_path, capsys):
        cfg = write(tmp_path, SMALL_SOLVE + "bogus line\n")
        assert main(["solve", "--config", str(cfg)]) == EXIT_CONFIG
        assert "config error" in capsys.readouterr().err

    def test_missing_config_file(self, tmp_path):
        assert main(["solve", "--config", str(tmp_path / "nope.cfg")]) == EXIT_CONFIG

    def test_bad_jobs(self, tmp_path):
        assert main(["solve", "--config", str(write(tmp_path, SMALL_SOLVE)), "--jobs", "0"]) == EXIT_CONFIG

    def test_module_entry_point(self, tmp_path):
        cfg = write(tmp_path, SMALL_SOLVE.replace("model.s = 0.5", "model.s = 1.5"))
        proc = subprocess.run(
            [sys.executable, "-m", "relgs", "solve", "--config", str(cfg)],
            capture_output=True, text=True,
        )
        assert proc.returncode == EXIT_CONFIG
        assert "s in (0,1)" in proc.stderr
