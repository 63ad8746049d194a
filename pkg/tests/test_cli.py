import json

import numpy as np
import pytest

from uflkit.cli import main
from uflkit.instance import read_instance
from uflkit.relaxation import solve_relaxation


@pytest.fixture
def instance_file(tmp_path):
    path = tmp_path / "inst.ufl"
    rc = main(["gen", "--facilities", "4", "--clients", "8", "--seed", "5",
               "--out", str(path)])
    assert rc == 0
    return path


def test_gen_writes_valid_instance(instance_file):
    inst = read_instance(instance_file)
    assert inst.facility_count == 4
    assert inst.client_count == 8


def test_gen_deterministic(tmp_path):
    a, b = tmp_path / "a.ufl", tmp_path / "b.ufl"
    for p in (a, b):
        assert main(["gen", "--facilities", "3", "--clients", "3",
                     "--seed", "9", "--out", str(p)]) == 0
    assert a.read_text() == b.read_text()


def test_solve_round_trip(tmp_path, instance_file, capsys):
    out = tmp_path / "sol.json"
    rc = main(["solve", "--instance", str(instance_file), "--out", str(out)])
    assert rc == 0
    data = json.loads(out.read_text())
    frac = solve_relaxation(read_instance(instance_file))
    assert data["objective"] == pytest.approx(frac.objective, abs=1e-12)
    assert np.allclose(data["y"], frac.y)
    captured = capsys.readouterr()
    assert "objective" in captured.out


def test_solve_tiny_instance_objective(tmp_path, capsys):
    path = tmp_path / "tiny.ufl"
    path.write_text("ufl 1\nfacilities 1\nclients 1\nopening 2\ndist\n3\n")
    out = tmp_path / "sol.json"
    assert main(["solve", "--instance", str(path), "--out", str(out)]) == 0
    assert json.loads(out.read_text())["objective"] == pytest.approx(5.0)


def test_missing_file_is_input_error(tmp_path, capsys):
    rc = main(["solve", "--instance", str(tmp_path / "nope.ufl"),
               "--out", str(tmp_path / "o.json")])
    assert rc == 1
    assert "input error" in capsys.readouterr().err


def test_bad_flag_exits_one(capsys):
    with pytest.raises(SystemExit) as exc:
        main(["solve", "--no-such-flag"])
    assert exc.value.code == 1


def test_malformed_instance_is_input_error(tmp_path, capsys):
    path = tmp_path / "bad.ufl"
    path.write_text("ufl 1\nfacilities 2\nclients 1\nopening 1 x\ndist\n1 2\n")
    rc = main(["solve", "--instance", str(path),
               "--out", str(tmp_path / "o.json")])
    assert rc == 1
    assert "line 4" in capsys.readouterr().err


def test_round_report_reproducible(tmp_path, instance_file, capsys):
    argv = ["round", "--instance", str(instance_file), "--gamma", "1.6774",
            "--trials", "2000", "--seed", "42"]
    assert main(argv) == 0
    first = capsys.readouterr().out
    assert main(argv) == 0
    second = capsys.readouterr().out
    assert first == second
    assert "facility_mean" in first
    assert "bound" in first


def test_round_gamma_below_one_rejected(instance_file, capsys):
    rc = main(["round", "--instance", str(instance_file), "--gamma", "0.5"])
    assert rc == 1


def test_round_writes_solution(tmp_path, instance_file):
    out = tmp_path / "rounded.json"
    assert main(["round", "--instance", str(instance_file), "--gamma", "1.5",
                 "--trials", "10", "--seed", "1", "--out", str(out)]) == 0
    data = json.loads(out.read_text())
    assert data["gamma"] == 1.5
    assert data["seed"] == 1
    inst = read_instance(instance_file)
    fac, conn = inst.solution_cost(data["open"])
    assert data["facility_cost"] == pytest.approx(fac)
    assert data["connection_cost"] == pytest.approx(conn)


def test_analyze_outputs(tmp_path, capsys):
    out = tmp_path / "an"
    rc = main(["analyze", "--grid-gamma", "40", "--grid-p", "40",
               "--grid-phi", "40", "--check-beta", "1.78",
               "--out", str(out)])
    assert rc == 0
    summary = json.loads((out / "summary.json").read_text())
    assert "beta_star" in summary
    assert summary["check_beta"]["approachable"] is True
    frontier_rows = (out / "frontier.csv").read_text().strip().splitlines()
    assert frontier_rows[0] == "phi,value"
    assert len(frontier_rows) == 41
    witness_rows = (out / "witness.csv").read_text().strip().splitlines()
    assert witness_rows[0] == "q,weight"
    assert len(witness_rows) == 41
    assert "beta_star" in capsys.readouterr().out


def test_analyze_jobs_invariance(tmp_path):
    outs = []
    for jobs, name in (("1", "a"), ("2", "b")):
        out = tmp_path / name
        assert main(["analyze", "--grid-gamma", "30", "--grid-p", "30",
                     "--grid-phi", "30", "--jobs", jobs,
                     "--out", str(out)]) == 0
        outs.append((out / "frontier.csv").read_text())
    assert outs[0] == outs[1]


def test_analyze_no_jms(tmp_path):
    out = tmp_path / "nojms"
    assert main(["analyze", "--grid-gamma", "30", "--grid-p", "30",
                 "--grid-phi", "30", "--no-jms", "--out", str(out)]) == 0
    summary = json.loads((out / "summary.json").read_text())
    assert summary["grid"]["include_jms"] is False


def test_best_gamma_output(instance_file, capsys):
    rc = main(["best-gamma", "--instance", str(instance_file),
               "--grid-gamma", "120"])
    assert rc == 0
    out = capsys.readouterr().out
    ratio = float(out.split("ratio: ")[1].splitlines()[0])
    jms_ref = float(out.split("ratio_jms_only: ")[1].splitlines()[0])
    cross = float(out.split("ratio_at_crossover_gamma: ")[1].splitlines()[0])
    assert ratio <= max(jms_ref, cross) + 1e-9


def test_best_gamma_degenerate_instance(tmp_path, capsys):
    path = tmp_path / "zero.ufl"
    path.write_text("ufl 1\nfacilities 1\nclients 2\nopening 3\ndist\n0\n0\n")
    rc = main(["best-gamma", "--instance", str(path)])
    assert rc == 0
    out = capsys.readouterr().out
    assert "degenerate profile" in out
    assert "ratio: 1.0" in out


def test_jms_command(tmp_path, instance_file, capsys):
    out = tmp_path / "jms.json"
    rc = main(["jms", "--instance", str(instance_file), "--out", str(out)])
    assert rc == 0
    data = json.loads(out.read_text())
    inst = read_instance(instance_file)
    fac, conn = inst.solution_cost(data["open"])
    assert data["facility_cost"] == pytest.approx(fac)


def test_hardness_command(capsys):
    assert main(["hardness", "--gamma-f", "1.463"]) == 0
    val = float(capsys.readouterr().out.strip())
    assert val == pytest.approx(1.46308, abs=1e-4)
