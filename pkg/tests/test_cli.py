"""End-to-end command-line behavior: dispatch, exit codes, file formats,
manifests and reproducibility."""

import json

import pytest

from levy_replenish import bstar_quadratic_closed_form, solve_bstar, spec_from_json
from levy_replenish.cli import main

MODEL_A_DOC = {
    "model": {"mu": 1.0, "sigma": 0.0, "lambda": 1.0,
              "jumps": {"weights": [1.0], "rates": [1.0]}},
    "q": 0.05, "r": 0.5, "C": 1.0, "cost": {"kind": "quadratic"},
}

BAD_COST_DOC = {
    "model": {"mu": 1.0, "sigma": 0.0, "lambda": 1.0,
              "jumps": {"weights": [1.0], "rates": [1.0]}},
    "q": 0.05, "r": 0.5, "C": 1.0,
    "cost": {"kind": "piecewise_linear", "h": 1.0, "p": 0.01},
}


@pytest.fixture()
def spec_path(tmp_path):
    p = tmp_path / "model_a.json"
    p.write_text(json.dumps(MODEL_A_DOC))
    return str(p)


@pytest.fixture()
def bad_path(tmp_path):
    p = tmp_path / "bad.json"
    p.write_text(json.dumps(BAD_COST_DOC))
    return str(p)


class TestSolve:
    def test_reports_barrier(self, spec_path, capsys):
        assert main(["solve", "--spec", spec_path]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["b_star"] == pytest.approx(-3.0868825436766945, abs=1e-8)
        assert out["residual"] <= 1e-10
        assert "classical_b_star" not in out

    def test_compare_classical_flag(self, spec_path, capsys):
        assert main(["solve", "--spec", spec_path, "--compare-classical"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["classical_b_star"] == pytest.approx(-4.025, abs=1e-8)

    def test_invalid_cost_exits_2_naming_requirement(self, bad_path, capsys):
        assert main(["solve", "--spec", bad_path]) == 2
        err = capsys.readouterr().err
        assert "cost_slope_bounds" in err


class TestValue:
    def test_rows_round_trip_exactly(self, spec_path, capsys):
        spec = spec_from_json(json.dumps(MODEL_A_DOC))
        b = solve_bstar(spec).b_star
        assert main(["value", "--spec", spec_path, f"--b={b!r}",
                     f"--x={b!r},{b + 1.0!r}"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        assert lines[0] == "x,value,derivative,err_estimate"
        from levy_replenish import value, value_derivative

        for line, x in zip(lines[1:], (b, b + 1.0)):
            cells = [float(c) for c in line.split(",")]
            assert cells[0] == x
            assert cells[1] == value(spec, b, x)  # exact round trip via repr
            assert cells[2] == value_derivative(spec, b, x)

    def test_empty_grid_header_only(self, spec_path, capsys):
        assert main(["value", "--spec", spec_path, "--b", "0.0", "--x", ""]) == 0
        assert capsys.readouterr().out.strip() == "x,value,derivative,err_estimate"

    def test_default_barrier_is_solved(self, spec_path, capsys):
        spec = spec_from_json(json.dumps(MODEL_A_DOC))
        b = bstar_quadratic_closed_form(spec)
        assert main(["value", "--spec", spec_path, f"--x={b!r}",
                     "--format", "json"]) == 0
        out = json.loads(capsys.readouterr().out)
        assert out["b"] == pytest.approx(b, abs=1e-8)
        assert out["rows"][0]["derivative"] == pytest.approx(-1.0, abs=1e-7)


class TestSimulate:
    ARGS = ["--x0", "-3.0", "--paths", "300", "--horizon", "40", "--dt", "0.01",
            "--seed", "12", "--b", "-3.0"]

    def test_fixed_seed_reproduces_json(self, spec_path, capsys):
        assert main(["simulate", "--spec", spec_path] + self.ARGS) == 0
        first = capsys.readouterr().out
        assert main(["simulate", "--spec", spec_path] + self.ARGS) == 0
        second = capsys.readouterr().out
        assert first == second

    def test_zero_paths_is_usage_error(self, spec_path):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--spec", spec_path, "--x0", "0", "--paths", "0",
                  "--horizon", "10", "--seed", "1"])
        assert exc.value.code == 2

    def test_seed_required(self, spec_path):
        with pytest.raises(SystemExit) as exc:
            main(["simulate", "--spec", spec_path, "--x0", "0", "--paths", "10",
                  "--horizon", "10"])
        assert exc.value.code == 2

    def test_compare_formula_reports_gap(self, spec_path, capsys):
        assert main(["simulate", "--spec", spec_path, "--compare-formula"]
                    + self.ARGS) == 0
        out = json.loads(capsys.readouterr().out)
        assert "formula_value" in out and "abs_z" in out
        assert out["abs_z"] >= 0.0

    def test_trace_dump(self, spec_path, tmp_path, capsys):
        trace = tmp_path / "paths.csv"
        assert main(["simulate", "--spec", spec_path, "--trace", "2",
                     "--trace-out", str(trace)] + self.ARGS) == 0
        lines = trace.read_text().strip().splitlines()
        assert lines[0] == "path,t,inventory,event"
        assert any(",start" in ln for ln in lines[1:])
        assert any(",end" in ln for ln in lines[1:])


class TestSweep:
    def test_rate_sweep_monotone(self, spec_path, capsys):
        assert main(["sweep", "--spec", spec_path, "--param", "r",
                     "--values", "0.5,5,50,500", "--x", "-3.0"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        bs = [float(ln.split(",")[2]) for ln in lines[1:]]
        assert all(b2 < b1 for b1, b2 in zip(bs, bs[1:]))

    def test_barrier_sweep_minimum_at_optimum(self, spec_path, capsys):
        spec = spec_from_json(json.dumps(MODEL_A_DOC))
        b = solve_bstar(spec).b_star
        vals = ",".join(repr(b + d) for d in (-1.0, -0.5, 0.0, 0.5, 1.0))
        assert main(["sweep", "--spec", spec_path, "--param", "b",
                     f"--values={vals}", f"--x={b!r}", "--format", "json"]) == 0
        out = json.loads(capsys.readouterr().out)
        col = [row["values"][0] for row in out["rows"]]
        assert min(col) == col[2]

    def test_singleton_matches_solve(self, spec_path, capsys):
        assert main(["sweep", "--spec", spec_path, "--param", "C",
                     "--values", "1.0", "--x", "0.0", "--format", "json"]) == 0
        row = json.loads(capsys.readouterr().out)["rows"][0]
        assert main(["solve", "--spec", spec_path]) == 0
        sol = json.loads(capsys.readouterr().out)
        assert row["b_star"] == pytest.approx(sol["b_star"], abs=1e-12)


class TestVerify:
    def test_single_check_stream(self, spec_path, capsys):
        assert main(["verify", "--spec", spec_path, "--seed", "3",
                     "--check", "m_derivative"]) == 0
        lines = capsys.readouterr().out.strip().splitlines()
        doc = json.loads(lines[0])
        assert doc["name"] == "m_derivative" and doc["pass"]

    def test_unknown_check_lists_available(self, spec_path, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "--spec", spec_path, "--seed", "3",
                  "--check", "bogus"])
        assert "slope_and_convexity" in str(exc.value.code)

    def test_tolerance_override_reflected_and_fails(self, spec_path, capsys):
        rc = main(["verify", "--spec", spec_path, "--seed", "3",
                   "--check", "generator", "--tol", "generator=1e-15"])
        assert rc == 1
        doc = json.loads(capsys.readouterr().out.strip().splitlines()[0])
        assert doc["tolerance"] == 1e-15 and not doc["pass"]


class TestOutputsAndManifest:
    def test_manifest_references_output(self, spec_path, tmp_path, capsys):
        out = tmp_path / "solution.json"
        assert main(["solve", "--spec", spec_path, "--out", str(out)]) == 0
        manifest = json.loads((tmp_path / "solution.json.manifest.json").read_text())
        assert manifest["subcommand"] == "solve"
        assert manifest["outputs"] == [str(out)]
        assert manifest["spec_path"] == spec_path
        assert json.loads(out.read_text())["b_star"] == pytest.approx(-3.08688, abs=1e-4)

    def test_version_flag(self, capsys):
        with pytest.raises(SystemExit) as exc:
            main(["--version"])
        assert exc.value.code == 0
