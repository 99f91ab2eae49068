import json
import os
import subprocess
import sys

import pytest

from copevolve.cli import main
from copevolve.experiment import derive_seed
from copevolve.problems import load_instance


QUICK_SOLVER = dict(
    population_size=8,
    archive_size=16,
    generations=50,
    epsilon_control_generation=10,
    fen_max=2000,
    success_tolerance=1e-2,
)


@pytest.fixture(scope="module")
def workdir(tmp_path_factory):
    return tmp_path_factory.mktemp("cli")


@pytest.fixture(scope="module")
def instance_path(workdir):
    path = str(workdir / "instance.json")
    code = main(["generate", "--dimension", "2", "--linear", "2",
                 "--seed", "3", "--out", path])
    assert code == 0
    return path


@pytest.fixture(scope="module")
def config_path(workdir):
    path = str(workdir / "solver.json")
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(QUICK_SOLVER, fh)
    return path


def test_generate_writes_loadable_instance(instance_path):
    instance = load_instance(instance_path)
    assert instance.dimension == 2
    assert instance.constraint_count == 2


def test_generate_deterministic_per_seed(workdir):
    a = str(workdir / "gen_a.json")
    b = str(workdir / "gen_b.json")
    c = str(workdir / "gen_c.json")
    assert main(["generate", "--dimension", "3", "--quadratic", "1",
                 "--seed", "11", "--out", a]) == 0
    assert main(["generate", "--dimension", "3", "--quadratic", "1",
                 "--seed", "11", "--out", b]) == 0
    assert main(["generate", "--dimension", "3", "--quadratic", "1",
                 "--seed", "12", "--out", c]) == 0
    assert open(a).read() == open(b).read()
    assert open(a).read() != open(c).read()


def test_solve_pipeline(instance_path, config_path, workdir):
    out = str(workdir / "result.json")
    code = main(["solve", "--instance", instance_path, "--config", config_path,
                 "--seed", "1", "--out", out])
    assert code == 0
    result = json.load(open(out))
    assert list(result.keys()) == ["status", "fen", "best_x", "best_f",
                                   "best_phi", "epsilon_trace"]
    assert result["status"] in ("Solved", "Exhausted")
    assert 0 < result["fen"] <= QUICK_SOLVER["fen_max"]
    assert len(result["best_x"]) == 2


def test_solve_deterministic(instance_path, config_path, workdir):
    a = str(workdir / "res_a.json")
    b = str(workdir / "res_b.json")
    for out in (a, b):
        assert main(["solve", "--instance", instance_path, "--config",
                     config_path, "--seed", "4", "--out", out]) == 0
    assert open(a).read() == open(b).read()


def test_features_pipeline(instance_path, workdir):
    out = str(workdir / "features.csv")
    code = main(["features", "--instance", instance_path, "--samples", "2000",
                 "--seed", "0", "--out", out])
    assert code == 0
    lines = open(out).read().splitlines()
    assert len(lines) == 2
    header = lines[0].split(",")
    row = dict(zip(header, lines[1].split(",")))
    assert row["instance_id"] == "instance"
    assert row["constraint_count"] == "2"
    assert 0.0 <= float(row["ratio"]) <= 1.0
    assert "angle_1_2" in header


def test_raster_pipeline(instance_path, workdir):
    out = str(workdir / "raster.csv")
    code = main(["raster", "--instance", instance_path, "--resolution", "16",
                 "--out", out])
    assert code == 0
    lines = open(out).read().splitlines()
    assert len(lines) == 16
    assert all(len(line.split(",")) == 16 for line in lines)
    assert set("".join(line.replace(",", "") for line in lines)) <= {"0", "1"}
    assert os.path.getsize(str(workdir / "raster.png")) > 0


def test_raster_no_figure_flag(instance_path, workdir):
    out = str(workdir / "bare.csv")
    assert main(["raster", "--instance", instance_path, "--resolution", "4",
                 "--no-figure", "--out", out]) == 0
    assert os.path.exists(out)
    assert not os.path.exists(str(workdir / "bare.png"))


def test_evolve_writes_instance_and_metadata(config_path, workdir):
    out_dir = str(workdir / "evolved")
    code = main(["evolve", "--direction", "hard", "--dimension", "2",
                 "--linear", "1", "--population", "4", "--generations", "1",
                 "--config", config_path, "--seed", "6", "--out", out_dir])
    assert code == 0
    instance = load_instance(os.path.join(out_dir, "instance.json"))
    assert instance.constraint_count == 1
    meta = json.load(open(os.path.join(out_dir, "meta.json")))
    assert meta["direction"] == "hard"
    assert meta["seed"] == 6
    assert meta["final_fen"] == meta["fitness_history"][-1]
    assert len(meta["fitness_history"]) == 2


def test_experiment_with_plan_file(workdir):
    plan_dict = {
        "objectives": ["sphere"],
        "dimension": 2,
        "constraint_templates": [["linear"]],
        "repeats": 1,
        "directions": ["easy", "hard"],
        "evolver_config": {"population_size": 4, "generations": 1},
        "solver_config": QUICK_SOLVER,
        "master_seed": 5,
        "sample_count": 2000,
    }
    plan_path = str(workdir / "plan.json")
    with open(plan_path, "w", encoding="utf-8") as fh:
        json.dump(plan_dict, fh)
    out_dir = str(workdir / "exp")
    code = main(["experiment", "--plan", plan_path, "--no-figures",
                 "--out", out_dir])
    assert code == 0
    report_dir = os.path.join(out_dir, "report")
    for name in ("fen_summary", "fen_runs", "ratio_summary", "angle_summary",
                 "box_coeff_sd", "box_distance", "features"):
        assert os.path.exists(os.path.join(report_dir, name + ".csv"))
    written = json.load(open(os.path.join(out_dir, "plan.json")))
    assert written["master_seed"] == 5
    meta = json.load(open(os.path.join(out_dir, "runs", "sphere_1L_easy",
                                       "run_00.meta.json")))
    assert meta["seed"] == derive_seed(5, 0, 0)


def test_experiment_seed_flag_overrides_plan(workdir):
    plan_path = str(workdir / "plan.json")  # written by the previous test
    out_dir = str(workdir / "exp_seeded")
    code = main(["experiment", "--plan", plan_path, "--no-figures",
                 "--seed", "9", "--out", out_dir])
    assert code == 0
    written = json.load(open(os.path.join(out_dir, "plan.json")))
    assert written["master_seed"] == 9


def test_exit_code_2_on_contract_violations(workdir, instance_path):
    bad = str(workdir / "bad_type.json")
    with open(bad, "w", encoding="utf-8") as fh:
        json.dump({"objective": "sphere", "dimension": 2,
                   "bounds": {"lower": [-5, -5], "upper": [5, 5]},
                   "constraints": [{"type": "cubic", "b": 0.0, "a": [1, 1]}]},
                  fh)
    assert main(["solve", "--instance", bad, "--seed", "0"]) == 2
    assert main(["generate", "--objective", "quartic",
                 "--out", str(workdir / "x.json")]) == 2
    three_d = str(workdir / "gen3.json")
    assert main(["generate", "--dimension", "3", "--out", three_d]) == 0
    assert main(["raster", "--instance", three_d, "--no-figure",
                 "--out", str(workdir / "r.csv")]) == 2


def test_exit_code_3_on_io_errors(workdir):
    assert main(["solve", "--instance", str(workdir / "missing.json"),
                 "--seed", "0"]) == 3
    garbled = str(workdir / "garbled.json")
    with open(garbled, "w", encoding="utf-8") as fh:
        fh.write("{not json")
    assert main(["features", "--instance", garbled]) == 3


def test_console_script_entry_point(workdir):
    out = str(workdir / "script_gen.json")
    proc = subprocess.run(
        [sys.executable, "-m", "copevolve.cli", "generate", "--dimension", "2",
         "--seed", "1", "--out", out],
        capture_output=True, text=True, timeout=120,
    )
    assert proc.returncode == 0, proc.stderr
    assert os.path.exists(out)
