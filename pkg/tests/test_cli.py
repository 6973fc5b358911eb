import json
import subprocess
import sys

import pytest

from aoii_sampling import experiments as ex
from aoii_sampling.cli import main


def run_cli(capsys, *argv):
    code = main(list(argv))
    out = capsys.readouterr()
    return code, out.out, out.err


class TestSolve:
    def test_small_instance(self, capsys):
        code, out, _ = run_cli(capsys, "solve", "--q", "0.5", "--q1", "0.5", "--S", "1", "--p", "2")
        assert code == 0
        assert "threshold  1" in out
        assert "avg_cost   0.666667" in out

    def test_figure_base(self, capsys):
        code, out, _ = run_cli(capsys, "solve", "--q", "0.4", "--q1", "0.3", "--S", "1", "--p", "20")
        assert code == 0 and "threshold  6" in out

    def test_invalid_q(self, capsys):
        code, _, err = run_cli(capsys, "solve", "--q", "0", "--q1", "0.3", "--S", "1", "--p", "20")
        assert code == 2 and "q=" in err

    def test_cap_too_small(self, capsys):
        code, _, err = run_cli(capsys, "solve", "--K", "5")
        assert code == 2 and "K=5" in err

    def test_non_convergence_exit_code(self, capsys, monkeypatch):
        from aoii_sampling import cli, solver

        monkeypatch.setattr(cli, "relative_value_iteration", lambda params, tol: solver.relative_value_iteration(params, tol, max_iter=2))
        code, _, err = run_cli(capsys, "solve")
        assert code == 3 and "did not reach" in err

    def test_json_output(self, capsys, tmp_path):
        path = tmp_path / "sol.json"
        code, _, _ = run_cli(capsys, "solve", "--q", "0.5", "--q1", "0.5", "--S", "1", "--p", "2", "--out", str(path))
        data = json.loads(path.read_text())
        assert code == 0 and data["threshold"] == 1
        assert data["policy"]["(1,0)"] == 1


class TestThreshold:
    def test_figure_base(self, capsys):
        code, out, _ = run_cli(capsys, "threshold", "--q", "0.4", "--q1", "0.3", "--S", "1", "--p", "20")
        assert code == 0
        assert "bounds     [4, 14]" in out and "v_opt      6" in out
        assert len([ln for ln in out.splitlines() if ln[:1].isdigit()]) == 11

    def test_always_sampling_corner(self, capsys):
        code, out, _ = run_cli(capsys, "threshold", "--q", "0.3", "--q1", "0.5", "--S", "5", "--p", "2")
        assert "bounds     [1, 1]" in out and "v_opt      1" in out

    def test_small_instance(self, capsys):
        code, out, _ = run_cli(capsys, "threshold", "--q", "0.5", "--q1", "0.5", "--S", "1", "--p", "2")
        assert "bounds     [1, 2]" in out and "v_opt      1" in out


class TestSweep:
    def test_p_sweep_files(self, capsys, tmp_path):
        out_csv, out_svg = tmp_path / "p.csv", tmp_path / "p.svg"
        code, out, _ = run_cli(capsys, "sweep", "--axis", "p", "--out", str(out_csv), "--svg", str(out_svg))
        assert code == 0
        rows = ex.sweep_from_csv(out_csv.read_text())
        assert [r.axis_value for r in rows] == ex.DEFAULT_GRIDS["p"]
        v = [r.v_opt for r in rows]
        assert v == sorted(v)
        assert out_svg.read_text().startswith("<svg")
        assert "[PASS] v_opt nondecreasing in p" in out

    def test_s_sweep_nonincreasing(self, capsys, tmp_path):
        out_csv = tmp_path / "s.csv"
        run_cli(capsys, "sweep", "--axis", "S", "--out", str(out_csv))
        v = [r.v_opt for r in ex.sweep_from_csv(out_csv.read_text())]
        assert v == sorted(v, reverse=True)

    def test_q1_sweep_nondecreasing(self, capsys, tmp_path):
        out_csv = tmp_path / "q1.csv"
        run_cli(capsys, "sweep", "--axis", "q1", "--out", str(out_csv))
        v = [r.v_opt for r in ex.sweep_from_csv(out_csv.read_text())]
        assert v == sorted(v)

    def test_invalid_point_exit_2(self, capsys, tmp_path):
        code, _, err = run_cli(capsys, "sweep", "--axis", "q", "--values", "0.5,1.5", "--out", str(tmp_path / "x.csv"))
        assert code == 2 and "q=1.5" in err

    def test_out_dir_env(self, capsys, tmp_path, monkeypatch):
        monkeypatch.setenv("AOII_SAMPLING_OUT_DIR", str(tmp_path))
        code, _, _ = run_cli(capsys, "sweep", "--axis", "p", "--values", "2,4")
        assert code == 0 and (tmp_path / "sweep_p.csv").exists()

    def test_rvi_and_simulate_columns(self, capsys, tmp_path):
        out_csv = tmp_path / "m.csv"
        code, _, _ = run_cli(capsys, "sweep", "--axis", "p", "--values", "4,20", "--modes", "bounds,closed_form,rvi,simulate",
                             "--horizon", "100000", "--burn-in", "1000", "--out", str(out_csv))
        rows = ex.sweep_from_csv(out_csv.read_text())
        assert code == 0 and all(r.cost_rvi is not None and r.cost_sim is not None for r in rows)


class TestConfigPrecedence:
    def test_config_then_flags(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("q = 0.5\nq1 = 0.5\nS = 1\np = 2\n")
        code, out, _ = run_cli(capsys, "threshold", "--config", str(cfg))
        assert "v_opt      1" in out
        code, out, _ = run_cli(capsys, "threshold", "--config", str(cfg), "--q", "0.4", "--q1", "0.3", "--p", "20")
        assert "v_opt      6" in out

    def test_bad_config_value(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("q = lots\n")
        code, _, err = run_cli(capsys, "threshold", "--config", str(cfg))
        assert code == 2 and "q" in err

    def test_dashed_keys(self, capsys, tmp_path):
        cfg = tmp_path / "run.cfg"
        cfg.write_text("burn-in = 99\nhorizon = 100\n")
        code, _, err = run_cli(capsys, "simulate", "--config", str(cfg), "--v-th", "3")
        assert code == 0
        code, _, err = run_cli(capsys, "simulate", "--config", str(cfg), "--burn-in", "100")
        assert code == 2


class TestHeatmap:
    def test_single_cell(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, "heatmap", "--q-values", "0.5", "--q1-values", "0.5", "--S", "1", "--p", "2",
                               "--out", str(tmp_path / "h.csv"))
        assert code == 0 and "cost_opt=0.666667" in out

    def test_grid_with_svg(self, capsys, tmp_path):
        code, out, _ = run_cli(capsys, "heatmap", "--q-values", "0.1,0.4,0.7,0.9", "--q1-values", "0.2,0.6",
                               "--out", str(tmp_path / "h.csv"), "--svg", str(tmp_path / "h.svg"))
        assert code == 0 and "[FAIL]" not in out
        assert (tmp_path / "h.svg").exists()


class TestSimulate:
    def test_small_instance(self, capsys):
        code, out, _ = run_cli(capsys, "simulate", "--q", "0.5", "--q1", "0.5", "--S", "1", "--p", "2", "--v-th", "1")
        line = next(ln for ln in out.splitlines() if ln.startswith("avg_cost"))
        mean, sigma = float(line.split()[1]), float(line.split()[3])
        assert abs(mean - 2 / 3) <= 3 * sigma

    def test_repeatable(self, capsys):
        args = ("simulate", "--horizon", "50000", "--seed", "9")
        assert run_cli(capsys, *args)[1] == run_cli(capsys, *args)[1]

    def test_burn_in_not_below_horizon(self, capsys):
        code, _, _ = run_cli(capsys, "simulate", "--horizon", "1000", "--burn-in", "1000")
        assert code == 2

    def test_histogram_csv(self, capsys, tmp_path):
        path = tmp_path / "hist.csv"
        run_cli(capsys, "simulate", "--horizon", "20000", "--out", str(path))
        lines = path.read_text().splitlines()
        assert lines[0] == "v,fraction"
        assert sum(float(ln.split(",")[1]) for ln in lines[1:]) == pytest.approx(1.0, abs=1e-9)


def test_module_entry_point():
    res = subprocess.run([sys.executable, "-m", "aoii_sampling", "threshold", "--q", "0.5", "--q1", "0.5", "--S", "1", "--p", "2"],
                         capture_output=True, text=True)
    assert res.returncode == 0 and "v_opt      1" in res.stdout


def test_argparse_usage_error():
    res = subprocess.run([sys.executable, "-m", "aoii_sampling", "sweep"], capture_output=True, text=True)
    assert res.returncode == 2
