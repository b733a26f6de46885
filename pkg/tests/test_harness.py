import json
from pathlib import Path

import pytest

from fastreact import harness
from fastreact.config import parse_sweep_plan
from fastreact.errors import InvalidParameter
from fastreact.harness import EXIT_ACCEPTANCE, EXIT_INVALID, EXIT_OK, EXIT_SOLVER, run_single, run_sweep, verify
from fastreact.problem import ProblemSpec, SolverTolerances

RUN = """[problem]
domain = half_line
R = {R}
k = 10
[grid]
resolution = 50
[output]
snapshot_count = 5
"""


@pytest.fixture
def config(tmp_path):
    p = tmp_path / "run.ini"
    p.write_text(RUN.format(R=6))
    return p


def test_run_artifacts(config, tmp_path):
    res = run_single(config, tmp_path / "out")
    assert res.status == EXIT_OK
    d = Path(res.run_dir)
    for name in ("run.ndjson", "report.ndjson", "plots.script", "front.ndjson", "front.csv"):
        assert (d / name).is_file(), name
    assert len(list((d / "snapshots").glob("system_*.csv"))) >= 6
    assert not (d / "FAILED").exists()
    steps = [json.loads(line) for line in (d / "run.ndjson").read_text().splitlines()]
    assert {"t", "dt", "picard_iters", "reaction_mass"} <= set(steps[0])
    # the plot script only reads files written into the run directory
    assert "snapshots/system_%04d.csv" in (d / "plots.script").read_text()


def test_rerun_is_byte_identical(config, tmp_path):
    a = run_single(config, tmp_path / "a")
    b = run_single(config, tmp_path / "b")
    assert Path(a.run_dir).name == Path(b.run_dir).name
    assert (Path(a.run_dir) / "report.ndjson").read_bytes() == (Path(b.run_dir) / "report.ndjson").read_bytes()


def test_invalid_radius(tmp_path):
    p = tmp_path / "bad.ini"
    p.write_text(RUN.format(R=0))
    res = run_single(p, tmp_path)
    assert res.status == EXIT_INVALID
    assert "R" in res.message and "line 3" in res.message


def test_solver_failure_is_reported(tmp_path):
    spec = ProblemSpec(R=4.0, resolution=25, T=0.01, k=100.0, snapshot_count=2,
                       tolerances=SolverTolerances(max_picard=1))
    res = harness.execute(spec, tmp_path / "fail", "system")
    assert res.status == EXIT_SOLVER
    assert (tmp_path / "fail" / "FAILED").is_file()


def test_crash_isolation(tmp_path, monkeypatch):
    def boom(spec):
        raise RuntimeError("simulated crash")

    monkeypatch.setattr(harness, "solve_system", boom)
    spec = ProblemSpec(R=4.0, resolution=25, T=0.01)
    out = harness._sweep_child((spec, str(tmp_path / "r"), None))
    assert out["status"] == EXIT_SOLVER and "simulated crash" in out["message"]
    assert (tmp_path / "r" / "FAILED").is_file()


PLAN = """[problem]
domain = half_line
epsilon = 0
[grid]
resolution = 100
[output]
snapshot_count = 20
[sweep]
k_values = {k}
grid_refinements = {res}
workers = {w}
"""


@pytest.fixture(scope="module")
def k_sweep(tmp_path_factory):
    root = tmp_path_factory.mktemp("sweep")
    plan = parse_sweep_plan(PLAN.format(k="10, 100, 1000", res="100", w=2))
    return run_sweep(plan, root), root


def test_k_sweep(k_sweep):
    report, root = k_sweep
    assert len(report.rows) == 3
    dist = [r["report"]["convergence_to_limit"]["total"] for r in report.rows]
    assert all(b < a for a, b in zip(dist, dist[1:]))
    assert report.passed, [p for p in report.properties if not p["passed"]]
    assert len(report.table().splitlines()) == 4
    sweep_dir = next(root.glob("sweep-*"))
    assert (sweep_dir / "index.json").is_file()
    assert (sweep_dir / "sweep_report.json").is_file()


def test_refinement_sweep(tmp_path):
    plan = parse_sweep_plan(PLAN.format(k="100", res="100, 200, 400", w=1))
    report = run_sweep(plan, tmp_path)
    props = {p["name"]: p for p in report.properties}
    ref = props["refinement eps=0 k=100"]
    assert ref["passed"]
    assert "relative changes" in ref["detail"]


def test_verify_passing_sweep(k_sweep):
    _, root = k_sweep
    lines, code = verify([next(root.glob("sweep-*"))])
    assert code == EXIT_OK
    assert lines and all(line.startswith("PASS") for line in lines)


def test_verify_fault_injection(k_sweep, tmp_path):
    _, root = k_sweep
    data = json.loads((next(root.glob("sweep-*")) / "sweep_report.json").read_text())
    data["rows"][1]["report"]["bounds_violation"] = 1.0
    bad = tmp_path / "sweep_report.json"
    bad.write_text(json.dumps(data))
    lines, code = verify([bad])
    assert code == EXIT_ACCEPTANCE
    failed = [line for line in lines if line.startswith("FAIL")]
    assert len(failed) == 2 and all("bounds" in line for line in failed)


def test_verify_errors(tmp_path):
    with pytest.raises(InvalidParameter):
        verify([])
    junk = tmp_path / "report.ndjson"
    junk.write_text("{not json\n")
    with pytest.raises(InvalidParameter):
        verify([junk])
    with pytest.raises(InvalidParameter):
        verify([tmp_path / "missing.ndjson"])
