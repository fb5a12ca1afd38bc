import json

import numpy as np
import pytest

from triofm.cli import aggregate, main
from triofm.config import Method, parse_config, problem_spec, solver_config
from triofm.exceptions import ConfigError
from triofm.linalg import MatrixOperator
from triofm.mmio import (read_block, read_eigenvalues, read_operator, write_block,
                         write_eigenvalues, write_operator)
from triofm.problems import DftSpec, HubbardSpec, SpectrumSpec

SMALL = """
problem = uniform
n = 40
seed = 1
p = 3
tolerance = 1e-8
"""


def _write(tmp_path, text, name="run.cfg"):
    path = tmp_path / name
    path.write_text(text)
    return str(path)


class TestConfig:
    def test_defaults(self):
        cfg = parse_config("")
        assert cfg["problem"] == "uniform" and cfg["p"] == 10 and cfg["runs"] == 20

    def test_comments_and_types(self):
        cfg = parse_config("n = 12  # grid\nlocking = off\nalpha = 0.4\nmethods = a, b\n")
        assert cfg["n"] == 12 and cfg["locking"] is False and cfg["alpha"] == 0.4
        assert cfg["methods"] == ["a", "b"]

    @pytest.mark.parametrize("text", ["colour = red", "n = ten", "just words"])
    def test_errors(self, text):
        with pytest.raises(ConfigError):
            parse_config(text)

    def test_problem_specs(self):
        assert problem_spec(parse_config("problem = logarithm\nn = 9")) == SpectrumSpec(
            "logarithm", 9, 0)
        assert isinstance(problem_spec(parse_config("problem = dft")), DftSpec)
        assert problem_spec(parse_config("problem = hubbard\nlx = 2\nly = 2\nn_up = 2\n"
                                         "n_dn = 2")) == HubbardSpec(2, 2, 2, 2)
        with pytest.raises(ConfigError):
            problem_spec(parse_config("problem = lattice"))

    def test_solver_config_exact_mapping(self):
        tri = solver_config(parse_config(""))
        assert tri.stepsize.kind == "exact-columnwise" and tri.locking
        ofm = solver_config(parse_config("method = ofm"))
        assert ofm.stepsize.kind == "exact-full" and not ofm.locking

    def test_ofm_locking_is_error(self):
        with pytest.raises(ConfigError):
            solver_config(parse_config("method = ofm\nlocking = on"))

    def test_method_tokens(self):
        assert Method.parse("triofm-cg") == Method(True, "cg", True)
        assert Method.parse("ofm-gd") == Method(False, "none", False)
        assert Method.parse("triofm-momentum-nolock").label == "triofm-momentum-nolock"
        for bad in ("ofm-cg-lock", "lobpcg-cg", "triofm-adam", "triofm"):
            with pytest.raises(ConfigError):
                Method.parse(bad)


class TestMatrixMarket:
    def test_dense_round_trip(self, tmp_path):
        a = np.random.default_rng(0).standard_normal((6, 6))
        a = a + a.T
        write_operator(tmp_path / "a.mtx", MatrixOperator.from_dense(a))
        np.testing.assert_array_equal(read_operator(tmp_path / "a.mtx").to_dense(), a)

    def test_sparse_round_trip(self, tmp_path):
        from triofm.problems import build_dft
        op = build_dft(DftSpec(n=20))
        write_operator(tmp_path / "d.mtx", op)
        np.testing.assert_array_equal(read_operator(tmp_path / "d.mtx").to_dense(),
                                      op.to_dense())

    def test_block_and_values(self, tmp_path):
        x = np.random.default_rng(1).standard_normal((5, 2))
        write_block(tmp_path / "x.mtx", x)
        np.testing.assert_array_equal(read_block(tmp_path / "x.mtx"), x)
        lam = np.array([-1.0 / 3.0, 0.1, 2.0])
        write_eigenvalues(tmp_path / "l.txt", lam)
        np.testing.assert_array_equal(read_eigenvalues(tmp_path / "l.txt"), lam)


class TestCli:
    def test_gen_uniform(self, tmp_path, capsys):
        cfg = _write(tmp_path, "problem = uniform\nn = 30\n")
        out = tmp_path / "u.mtx"
        assert main(["gen", cfg, "-o", str(out), "--vectors"]) == 0
        assert read_operator(out).n == 30
        assert read_eigenvalues(tmp_path / "u.eigvals.txt").size == 30
        assert read_block(tmp_path / "u.eigvecs.mtx").shape == (30, 30)

    def test_gen_hubbard(self, tmp_path):
        cfg = _write(tmp_path, "problem = hubbard\nlx = 2\nly = 2\nn_up = 2\nn_dn = 2\n")
        out = tmp_path / "h.mtx"
        assert main(["gen", cfg, "-o", str(out)]) == 0
        assert read_operator(out).n == 36

    def test_gen_malformed(self, tmp_path, capsys):
        cfg = _write(tmp_path, "problem uniform\n")
        assert main(["gen", cfg, "-o", str(tmp_path / "x.mtx")]) == 2
        assert "config error" in capsys.readouterr().err

    def test_missing_config(self, tmp_path):
        assert main(["solve", str(tmp_path / "nope.cfg")]) == 2

    def test_solve_converges(self, tmp_path):
        cfg = _write(tmp_path, SMALL)
        report, trace = tmp_path / "r.json", tmp_path / "t.csv"
        assert main(["solve", cfg, "--report", str(report), "--trace", str(trace)]) == 0
        rep = json.loads(report.read_text())
        assert rep["converged"] and rep["e_val"] <= 1e-10 and rep["e_vec"] <= 1e-6
        assert rep["environment"]["seed"] == 1
        assert trace.read_text().startswith("iteration,col_index,")

    def test_solve_one_iteration(self, tmp_path):
        cfg = _write(tmp_path, SMALL)
        report, trace = tmp_path / "r.json", tmp_path / "t.csv"
        code = main(["solve", cfg, "--max-iterations", "1", "--report", str(report),
                     "--trace", str(trace)])
        assert code == 1
        rows = {line.split(",")[0] for line in trace.read_text().splitlines()[1:]}
        assert rows == {"1"}

    def test_solve_ofm_flags_evec(self, tmp_path):
        cfg = _write(tmp_path, SMALL + "method = ofm\n")
        report = tmp_path / "r.json"
        main(["solve", cfg, "--report", str(report)])
        rep = json.loads(report.read_text())
        assert rep["e_vec"] is None and rep["e_vec_available"] is False

    def test_solve_divergence(self, tmp_path):
        cfg = _write(tmp_path, SMALL + "stepsize = fixed\nalpha = 50\nacceleration = none\n")
        assert main(["solve", cfg, "--report", str(tmp_path / "r.json")]) == 3

    def test_solve_matrix_file(self, tmp_path):
        a = MatrixOperator.from_diagonal(np.linspace(-2.0, 1.0, 12))
        write_operator(tmp_path / "a.mtx", a)
        cfg = _write(tmp_path, "p = 2\n")
        report, xout = tmp_path / "r.json", tmp_path / "x.mtx"
        assert main(["solve", cfg, "--matrix", str(tmp_path / "a.mtx"), "--report",
                     str(report), "--x-out", str(xout)]) == 0
        rep = json.loads(report.read_text())
        np.testing.assert_allclose(rep["ritz_values"], [-2.0, np.linspace(-2, 1, 12)[1]],
                                   atol=1e-8)
        assert read_block(xout).shape == (12, 2)

    def test_trace_deterministic(self, tmp_path):
        cfg = _write(tmp_path, SMALL)
        main(["solve", cfg, "--trace", str(tmp_path / "a.csv"), "--report", str(tmp_path / "a")])
        main(["solve", cfg, "--trace", str(tmp_path / "b.csv"), "--report", str(tmp_path / "b")])
        assert (tmp_path / "a.csv").read_bytes() == (tmp_path / "b.csv").read_bytes()

    def test_bench(self, tmp_path):
        cfg = _write(tmp_path, SMALL + "runs = 2\nmethods = triofm-cg, ofm-cg, triofm-gd\n"
                     "max_iterations = 3000\n")
        report = tmp_path / "b.json"
        assert main(["bench", cfg, "--report", str(report)]) == 0
        rep = json.loads(report.read_text())
        assert set(rep["methods"]) == {"triofm-cg", "ofm-cg", "triofm-gd"}
        for body in rep["methods"].values():
            runs = body["runs"]
            agg = body["aggregate"]
            its = [r["iterations"] for r in runs]
            assert agg["iterations"]["mean"] == pytest.approx(np.mean(its))
            assert agg["iterations"]["max"] == max(its)
            assert agg["column_accesses"]["min"] == min(r["column_accesses"] for r in runs)

    def test_bench_single_run(self, tmp_path):
        cfg = _write(tmp_path, SMALL)
        report = tmp_path / "b.json"
        assert main(["bench", cfg, "--runs", "1", "--report", str(report)]) == 0
        body = json.loads(report.read_text())["methods"]["triofm-cg"]
        run, agg = body["runs"][0], body["aggregate"]
        for key in ("iterations", "column_accesses"):
            assert agg[key]["mean"] == agg[key]["max"] == agg[key]["min"] == run[key]

    def test_aggregate_skips_missing(self):
        agg = aggregate([{"converged": True, "iterations": 4}, {"diverged": True}])
        assert agg["iterations"] == {"mean": 4.0, "max": 4.0, "min": 4.0}
        assert agg["diverged"] == 1 and agg["e_vec"] is None

    def test_rate_fit(self, tmp_path, capsys):
        cfg = _write(tmp_path, "problem = logarithm\nn = 60\np = 2\nstepsize = fixed\n"
                     "alpha = 0.4\nacceleration = none\ntolerance = 1e-10\n")
        trace = tmp_path / "t.csv"
        main(["solve", cfg, "--trace", str(trace), "--report", str(tmp_path / "r.json")])
        main(["gen", cfg, "-o", str(tmp_path / "a.mtx")])
        capsys.readouterr()
        assert main(["rate-fit", str(trace), "--column", "1", "--tol", "1e-10",
                     "--eigenvalues", str(tmp_path / "a.eigvals.txt"), "--alpha", "0.4"]) == 0
        line = capsys.readouterr().out.strip()
        fitted = float(line.split("fitted")[1].split()[0])
        assert fitted == pytest.approx(0.7952, abs=5e-3)
        assert "reference 0.795200" in line
