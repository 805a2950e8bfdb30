"""End-to-end pipeline runs, report artifacts, and the command line."""

import json
import pytest

import util
from chanceopt.alcc import SolverParams
from chanceopt.cli import main
from chanceopt.mc import McConfig
from chanceopt.pipeline import run_pipeline, series_csv_text
from chanceopt.problem_io import RunOptions, write_problem


def quick_options(**kw):
    solver = SolverParams(nu0=1.0, tol=1e-3, max_outer=12, max_inner_cap=2000)
    base = dict(order=2, omega_r=0.01, solver=solver,
                mc=McConfig(samples=20_000, grid_points=11, seed=0))
    base.update(kw)
    return RunOptions(**base)


@pytest.fixture(scope="module")
def toy_file(tmp_path_factory):
    path = tmp_path_factory.mktemp("problems") / "toy.json"
    write_problem(util.toy_problem(), path, RunOptions(order=2))
    return path


class TestRunPipeline:
    def test_solve(self):
        report = run_pipeline(util.toy_problem(), quick_options(), "solve")
        res = report.results[0]
        assert res.order == 2
        assert abs(res.p_sdp - 0.66) < 0.05
        assert abs(res.x[0] - 0.5) < 0.1
        assert res.solver["status"] == "converged"
        assert "build" in res.wall_times and "solve" in res.wall_times

    def test_refine_carries_both_estimates(self):
        report = run_pipeline(util.toy_problem(), quick_options(), "refine")
        res = report.results[0]
        assert res.p_refine_indicator is not None
        assert res.p_refine_weighted is not None
        assert res.p_refine_indicator <= res.p_sdp + 1e-3

    def test_verify_at_fixed_point(self):
        report = run_pipeline(util.toy_problem(), quick_options(), "verify",
                              verify_at=[0.5])
        res = report.results[0]
        assert abs(res.p_mc - 0.25) <= 0.02
        assert res.p_sdp is None

    def test_upper_estimate_dominates_monte_carlo(self):
        report = run_pipeline(util.toy_problem(), quick_options(), "verify")
        res = report.results[0]
        assert res.p_sdp + 1e-3 >= res.p_mc - res.p_mc_halfwidth

    def test_probability_estimates_in_range(self):
        report = run_pipeline(util.toy_problem(), quick_options(), "refine")
        res = report.results[0]
        for value in (res.p_sdp, res.p_refine_indicator, res.p_refine_weighted):
            assert 0.0 <= value <= 1.0 + 1e-2

    def test_sweep_series_reproducible(self):
        opts = quick_options(mc=McConfig(samples=5_000, grid_points=5, seed=4))
        r1 = run_pipeline(util.toy_problem(), opts, "sweep", orders=(2, 3))
        r2 = run_pipeline(util.toy_problem(), opts, "sweep", orders=(2, 3))
        assert series_csv_text(r1.results) == series_csv_text(r2.results)
        p_col = [res.p_sdp for res in r1.results]
        assert p_col[1] <= p_col[0] + 1e-3

    def test_build_report(self):
        report = run_pipeline(util.toy_problem(), quick_options(), "build")
        assert report.program is not None
        assert report.results[0].solver["num_scalars"] == 20

    def test_report_files(self, tmp_path):
        report = run_pipeline(util.toy_problem(), quick_options(), "solve",
                              source_hash="abc123")
        json_path = report.write(tmp_path)
        assert json_path.name == "toy_d2_report.json"
        doc = json.loads(json_path.read_text())
        assert doc["input_sha256"] == "abc123"
        assert doc["results"][0]["p_sdp"] == pytest.approx(
            report.results[0].p_sdp)


class TestCli:
    def test_solve_exit_zero(self, toy_file, tmp_path, capsys):
        code = main(["solve", str(toy_file), "--max-inner-cap", "2000",
                     "--tol", "1e-3", "--max-outer", "12",
                     "--out-dir", str(tmp_path)])
        out = capsys.readouterr().out
        assert code == 0
        assert "p_sdp=0.66" in out
        assert (tmp_path / "toy_d2_report.json").exists()

    def test_bundled_name_resolves(self, tmp_path):
        code = main(["build", "example1_pair", "--order", "1",
                     "--out-dir", str(tmp_path)])
        assert code == 0
        assert (tmp_path / "example1_pair_d1_program.txt").exists()
        text = (tmp_path / "example1_pair_d1_program.txt").read_text()
        assert text.startswith("conicprogram v1")
        assert "np.float64" not in text

    def test_input_error_exit_two(self, tmp_path, capsys):
        bad = tmp_path / "bad.json"
        bad.write_text("{}")
        assert main(["solve", str(bad)]) == 2
        assert "input error" in capsys.readouterr().err

    def test_missing_file_exit_two(self):
        assert main(["solve", "no_such_problem.json"]) == 2

    def test_order_too_small_exit_two(self, toy_file, capsys):
        assert main(["solve", str(toy_file), "--order", "1"]) == 2
        assert "minimum relaxation order" in capsys.readouterr().err

    def test_resource_guard_exit_four(self, tmp_path, capsys):
        from chanceopt.problems import bundled_path
        code = main(["grid", "example1_5d", "--grid", "41", "--samples", "10",
                     "--out-dir", str(tmp_path)])
        assert code == 4
        assert "resource guard" in capsys.readouterr().err

    def test_solver_trouble_exit_three(self, toy_file, tmp_path):
        # one outer iteration with a tiny tolerance cannot converge
        code = main(["solve", str(toy_file), "--max-outer", "1",
                     "--tol", "1e-12", "--max-inner-cap", "50",
                     "--out-dir", str(tmp_path)])
        assert code == 3
        doc = json.loads((tmp_path / "toy_d2_report.json").read_text())
        assert doc["status"] == "complete_with_flags"

    def test_verify_at_flag(self, toy_file, tmp_path, capsys):
        code = main(["verify", str(toy_file), "--at", "0.5",
                     "--samples", "40000", "--out-dir", str(tmp_path)])
        assert code == 0
        assert "p_mc=0.25" in capsys.readouterr().out

    def test_sweep_writes_series(self, toy_file, tmp_path):
        code = main(["sweep", str(toy_file), "--dmin", "2", "--dmax", "2",
                     "--max-inner-cap", "800", "--tol", "1e-3",
                     "--samples", "5000", "--out-dir", str(tmp_path)])
        assert code == 0
        series = (tmp_path / "toy_series.csv").read_text()
        header = series.splitlines()[0]
        assert header == "order,p_sdp,p_refine_indicator,p_refine_weighted,p_mc,p_mc_halfwidth"

    def test_sweep_identical_bytes(self, toy_file, tmp_path):
        for sub in ("a", "b"):
            (tmp_path / sub).mkdir()
            main(["sweep", str(toy_file), "--dmin", "2", "--dmax", "2",
                  "--max-inner-cap", "800", "--tol", "1e-3",
                  "--samples", "5000", "--out-dir", str(tmp_path / sub)])
        a = (tmp_path / "a" / "toy_series.csv").read_bytes()
        b = (tmp_path / "b" / "toy_series.csv").read_bytes()
        assert a == b

    def test_interrupt_writes_partial_report(self, toy_file, tmp_path,
                                             monkeypatch, capsys):
        import chanceopt.pipeline as pl

        calls = {"n": 0}
        real = pl.alcc_solve

        def flaky(program, params, **kw):
            calls["n"] += 1
            if calls["n"] >= 2:
                raise KeyboardInterrupt
            return real(program, params, **kw)

        monkeypatch.setattr(pl, "alcc_solve", flaky)
        code = main(["sweep", str(toy_file), "--dmin", "2", "--dmax", "3",
                     "--max-inner-cap", "800", "--tol", "1e-3",
                     "--samples", "2000", "--out-dir", str(tmp_path)])
        assert code == 130
        doc = json.loads((tmp_path / "toy_report.json").read_text())
        assert doc["status"] == "interrupted"
        assert "partial report" in capsys.readouterr().err

    def test_chebyshev_flag(self, toy_file, tmp_path, capsys):
        code = main(["solve", str(toy_file), "--basis", "chebyshev",
                     "--max-inner-cap", "2000", "--tol", "1e-3",
                     "--max-outer", "12", "--out-dir", str(tmp_path)])
        assert code == 0
        assert "p_sdp=0.6" in capsys.readouterr().out
