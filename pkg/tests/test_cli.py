import csv
import io
import json
import math
import re
import subprocess
import sys

import pytest

from eigenbound import cli, compfun, model
from eigenbound.verify import closed_form

BOUND_KEYS = {"request", "method", "eigenvalue", "eigenvalues", "disagreement", "closed_form",
              "residual", "iterations", "bracket", "oracle_cells", "validation", "certificate"}


def run(capsys, *argv):
    code = cli.main(list(argv))
    out, err = capsys.readouterr()
    return code, out, err


def bound(capsys, *argv):
    code, out, _ = run(capsys, "bound", *argv)
    assert code == cli.EXIT_OK
    return json.loads(out)


def test_bound_neumann_p2(capsys):
    rep = bound(capsys, "neumann", "--m", "2", "--p", "2", "--kappa", "0",
                "--diameter", "3.14159265")
    assert rep["eigenvalue"] == pytest.approx(1.0, abs=1e-7)
    assert rep["closed_form"] == pytest.approx((math.pi / 3.14159265) ** 2, rel=1e-15)
    assert set(rep) == BOUND_KEYS
    assert len(rep["certificate"]["s"]) == len(rep["certificate"]["phi"]) == cli.CERT_POINTS


def test_bound_neumann_p15(capsys):
    rep = bound(capsys, "neumann", "--m", "2", "--p", "1.5", "--kappa", "0", "--diameter", "1")
    want = 0.5 * compfun.pi_p(1.5) ** 1.5
    assert want == pytest.approx(0.5 * 4.8367984 ** 1.5, rel=1e-7)
    assert rep["eigenvalue"] == pytest.approx(want, rel=1e-8)
    assert rep["eigenvalue"] == pytest.approx(5.3187, abs=1e-4)


def test_bound_dirichlet_both_methods(capsys):
    rep = bound(capsys, "dirichlet", "--m", "2", "--p", "2", "--kappa", "0", "--lambda", "0",
                "--inradius", "1", "--method", "both", "--cells", "2048")
    assert rep["eigenvalues"]["shoot"] == pytest.approx(2.4674011, abs=1e-7)
    assert rep["eigenvalues"]["oracle"] == pytest.approx(math.pi ** 2 / 4, rel=1e-6)
    assert rep["disagreement"] < 1e-6
    assert rep["request"]["inradius"] == 1.0 and rep["request"]["diameter"] is None


def test_bound_classical_sphere(capsys):
    rep = bound(capsys, "classical", "--n", "3", "--p", "2", "--kappa", "1",
                "--diameter", str(math.pi))
    assert rep["eigenvalue"] == pytest.approx(3.0, rel=1e-8)
    assert rep["validation"]["singular_end"] == pytest.approx(math.pi / 2)
    assert rep["closed_form"] is None


def test_custom_profile_matches_named(capsys):
    named = bound(capsys, "neumann", "--m", "2", "--p", "2", "--kappa", "0.5", "--diameter", "1")
    custom = bound(capsys, "neumann", "--p", "2", "--profile", "custom", "4:0.5,3:2",
                   "--diameter", "1")
    assert custom["eigenvalue"] == named["eigenvalue"]
    code, _, err = run(capsys, "bound", "neumann", "--p", "2", "--profile", "named", "4:1",
                       "--diameter", "1")
    assert code == cli.EXIT_INVALID


def test_floats_have_17_digits():
    text = cli.dumps({"x": 0.1, "y": [1 / 3], "z": float("nan"), "b": True})
    assert '"x": 0.10000000000000001' in text
    assert "0.33333333333333331" in text
    assert json.loads(text) == {"x": 0.1, "y": [1 / 3], "z": None, "b": True}


def test_bound_is_deterministic(capsys):
    argv = ("neumann", "--m", "3", "--p", "3", "--kappa", "-1", "--diameter", "1.2")
    assert run(capsys, "bound", *argv)[1] == run(capsys, "bound", *argv)[1]


def test_validation_failure_exit_code(capsys):
    code, out, err = run(capsys, "bound", "neumann", "--m", "2", "--p", "2", "--kappa", "1",
                         "--diameter", str(math.pi))
    assert code == cli.EXIT_INVALID
    assert out == "" and "validation error" in err


def test_request_errors(capsys):
    assert run(capsys, "bound", "neumann", "--m", "2", "--p", "2", "--lambda", "0.5",
               "--diameter", "1")[0] == cli.EXIT_INVALID
    assert run(capsys, "bound", "neumann", "--m", "2", "--p", "2")[0] == cli.EXIT_INVALID
    assert run(capsys, "bound", "neumann", "--m", "2", "--p", "0.5",
               "--diameter", "1")[0] == cli.EXIT_INVALID


def test_solver_failure_exit_code(capsys, monkeypatch):
    from eigenbound import shoot
    monkeypatch.setattr(shoot, "first_flux_zero", lambda problem, mu: None)
    code, _, err = run(capsys, "bound", "neumann", "--m", "2", "--p", "2", "--diameter", "1")
    assert code == cli.EXIT_SOLVER
    assert "solver failure" in err


def test_subprocess_exit_codes():
    def call(*argv):
        return subprocess.run([sys.executable, "-m", "eigenbound", *argv],
                              capture_output=True, text=True)
    ok = call("bound", "neumann", "--m", "2", "--p", "2", "--diameter", "2")
    assert ok.returncode == 0
    assert json.loads(ok.stdout)["eigenvalue"] == pytest.approx(math.pi ** 2 / 4, rel=1e-8)
    bad = call("bound", "dirichlet", "--m", "2", "--p", "2", "--lambda", "1", "--inradius", "2")
    assert bad.returncode == 2


# --- sweep ---------------------------------------------------------------

def sweep(capsys, grid, *extra):
    code, out, _ = run(capsys, "sweep", grid, *extra)
    return code, list(csv.DictReader(io.StringIO(out))), out


def test_sweep_example_grid(capsys, monkeypatch):
    monkeypatch.setenv("EIGENBOUND_THREADS", "2")
    code, rows, text = sweep(capsys, "m=2,3;p=1.5,2;kappa=0;D=1:2:3")
    assert code == 0
    assert text.splitlines()[0] == ",".join(cli.SWEEP_HEADER)
    assert len(rows) == 12
    # lexicographic grid order: m, then p, then D
    keys = [(int(r["m"]), float(r["p"]), float(r["length"])) for r in rows]
    assert keys == sorted(keys)
    for r in rows:
        assert not r["error"]
        want = closed_form(float(r["p"]), float(r["length"]))
        assert float(r["eigenvalue"]) == pytest.approx(want, rel=1e-6)
        assert re.fullmatch(r"-?\d\.\d{16}(e[-+]\d+)?", r["eigenvalue"])


def test_sweep_independent_of_worker_count(capsys, monkeypatch):
    grid = "m=2;p=2,3;kappa=-1,0.2;D=0.5,1"
    monkeypatch.setenv("EIGENBOUND_THREADS", "1")
    one = sweep(capsys, grid)[2]
    monkeypatch.setenv("EIGENBOUND_THREADS", "3")
    three = sweep(capsys, grid)[2]
    assert one == three


def test_sweep_decreasing_in_diameter(capsys, monkeypatch):
    monkeypatch.setenv("EIGENBOUND_THREADS", "1")
    _, rows, _ = sweep(capsys, "m=2;p=1.5;kappa=-1;D=0.4:2:9")
    vals = [float(r["eigenvalue"]) for r in rows]
    assert all(a > b for a, b in zip(vals, vals[1:]))


def test_sweep_partial_and_total_failure(capsys, monkeypatch):
    monkeypatch.setenv("EIGENBOUND_THREADS", "1")
    code, rows, _ = sweep(capsys, "m=2;p=2;kappa=1;D=1,3.5")
    assert code == 0
    assert rows[0]["error"] == "" and rows[1]["error"].startswith("ValidationError")
    assert rows[1]["eigenvalue"] == ""
    code, rows, _ = sweep(capsys, "m=2;p=2;kappa=1;D=3.5,4")
    assert code == cli.EXIT_INVALID
    assert len(rows) == 2


def test_sweep_dirichlet_rows(capsys, monkeypatch):
    monkeypatch.setenv("EIGENBOUND_THREADS", "1")
    code, rows, _ = sweep(capsys, "theorem=dirichlet;m=2;p=2;lambda=0,0.5;R=1")
    assert code == 0
    assert float(rows[0]["eigenvalue"]) == pytest.approx(math.pi ** 2 / 4, rel=1e-8)
    assert float(rows[1]["eigenvalue"]) > float(rows[0]["eigenvalue"])


@pytest.mark.parametrize("grid", ["m=2;D=1", "m=2;p=2;p=3;D=1", "q=1;p=2;D=1",
                                  "m=2;p=2;D=1:2", "m=2.5;p=2;D=1"])
def test_sweep_bad_grid(capsys, grid):
    assert run(capsys, "sweep", grid)[0] == cli.EXIT_INVALID


def test_grid_points_are_a_cartesian_product():
    axes = cli.parse_grid("m=2,3;p=1.5,2;kappa=0;D=1:2:3")
    assert [name for name, _ in axes] == ["m", "p", "kappa", "length"]
    pts = list(cli.grid_points(axes, {}))
    assert len(pts) == 12
    assert pts[0] == {"m": 2, "p": 1.5, "kappa": 0.0, "length": 1.0}
    assert pts[-1] == {"m": 3, "p": 2.0, "kappa": 0.0, "length": 2.0}


def test_thread_env_parsing(monkeypatch):
    monkeypatch.setenv("EIGENBOUND_THREADS", "4")
    assert cli.sweep_workers(2) == 2
    assert cli.sweep_workers(10) == 4
    monkeypatch.setenv("EIGENBOUND_THREADS", "many")
    with pytest.raises(cli.RequestError):
        cli.sweep_workers(3)


# --- verify --------------------------------------------------------------

def without_timing(text):
    # timing is the last section of the report
    return text[:text.index('"timing"')]


def test_verify_subset_passes_and_is_deterministic(capsys):
    code, first, _ = run(capsys, "verify", "--criteria", "5,7,9")
    assert code == 0
    rep = json.loads(first)
    assert rep["passed"] is True
    assert [c["id"] for c in rep["criteria"]] == [5, 7, 9]
    assert set(rep["timing"]["seconds"]) == {"5", "7", "9"}
    code, second, _ = run(capsys, "verify", "--criteria", "5,7,9")
    assert without_timing(first) == without_timing(second)


def test_verify_detects_injected_weight_bug(capsys, monkeypatch):
    good = model.weight
    monkeypatch.setattr(model, "weight", lambda problem, s: 1.0 / good(problem, s))
    code, out, _ = run(capsys, "verify", "--criteria", "8")
    assert code == cli.EXIT_FAIL
    assert json.loads(out)["criteria"][0]["passed"] is False


def test_verify_unknown_criterion(capsys):
    assert run(capsys, "verify", "--criteria", "42")[0] == cli.EXIT_INVALID


def test_verify_writes_file(capsys, tmp_path):
    target = tmp_path / "report.json"
    code, out, _ = run(capsys, "verify", "--criteria", "9", "--out", str(target))
    assert code == 0 and out == ""
    assert json.loads(target.read_text())["passed"] is True


# --- flow ----------------------------------------------------------------

def test_flow_command(capsys):
    code, out, _ = run(capsys, "flow", "neumann", "--m", "2", "--p", "2", "--kappa", "-1",
                       "--diameter", "1", "--cells", "32")
    assert code == 0
    rep = json.loads(out)
    assert rep["relative_error"] < 1e-2
    assert rep["expected_rate"] == pytest.approx(rep["eigenvalue"], rel=1e-15)
    assert len(rep["decay"]["t"]) == len(rep["decay"]["max_norm"])


def test_flow_sine_initial_data(capsys):
    code, out, _ = run(capsys, "flow", "neumann", "--m", "2", "--p", "2", "--kappa", "0",
                       "--diameter", str(math.pi), "--cells", "32", "--initial", "sine")
    assert code == 0
    assert json.loads(out)["rate"] == pytest.approx(1.0, rel=1e-2)
