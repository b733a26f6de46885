import json
import math

import numpy as np
import pytest

from conftest import STANDARD_DOMAINS, STANDARD_EPS, STANDARD_K
from fastreact.diagnostics import (
    DiagnosticsReport,
    Perturbation,
    bounds_violation,
    compare_to_limit,
    comparison_test,
    limit_trajectory_for,
    measure,
    random_perturbations,
)
from fastreact.errors import InvalidParameter
from fastreact.problem import DtControl, ProblemSpec, Trajectory
from fastreact.system import solve_system
from fastreact.limit import solve_limit, limit_spec_from


def small(**kw):
    base = dict(domain="half_line", R=4.0, resolution=100, T=0.2, snapshot_count=10, k=100.0)
    base.update(kw)
    return ProblemSpec(**base)


def test_no_partner_no_reaction():
    spec = small()
    n = spec.grid.cell_count
    u0 = np.where(spec.grid.centers < 0.5, 1.0, 0.0)
    rep = measure(solve_system(spec, initial=(u0, np.zeros(n))), spec)
    assert rep.segregation_norm == 0.0
    assert rep.reaction_mass == 0.0


def test_uniform_segregation_matches_ode():
    k, T = 10.0, 0.5
    spec = ProblemSpec(domain="whole_line", R=4.0, cells=16, k=k, T=T, snapshot_count=10,
                       dt_control=DtControl(dt_max=1e-4))
    n = spec.grid.cell_count
    rep = measure(solve_system(spec, initial=(np.ones(n), np.ones(n))), spec)
    # int_0^T (1 + k t)^-2 dt times the domain length
    exact = (1.0 - 1.0 / (1.0 + k * T)) / k * spec.length
    assert rep.segregation_norm == pytest.approx(exact, rel=1e-4)


def test_report_invariants():
    spec = small(epsilon=0.5)
    traj = solve_system(spec)
    rep = measure(traj, spec, limit_trajectory_for(spec))
    assert rep.bounds_violation <= 1e-10
    assert rep.segregation_norm >= 0
    # mass from the per-step tally and k times the segregation tally
    assert rep.reaction_mass == pytest.approx(spec.k * rep.segregation_norm, rel=1e-10)
    assert traj.steps[-1]["reaction_mass"] == pytest.approx(rep.reaction_mass, rel=1e-12)
    flat = json.loads(rep.to_ndjson())
    numbers = []

    def walk(obj):
        if isinstance(obj, dict):
            for v in obj.values():
                walk(v)
        elif isinstance(obj, list):
            for v in obj:
                walk(v)
        elif isinstance(obj, (int, float)) and not isinstance(obj, bool):
            numbers.append(obj)

    walk(flat)
    assert numbers and all(math.isfinite(x) for x in numbers)
    assert rep.conservation_defect <= 1e-8
    assert rep.far_field_monitor <= 1e-8


def test_bounds_violation_detects_overshoot():
    spec = small()
    traj = Trajectory(spec.grid)
    n = spec.grid.cell_count
    traj.add_snapshot(0.0, {"u": np.full(n, 0.5), "v": np.full(n, 0.5)})
    assert bounds_violation(traj, 1.0, 1.0) == 0.0
    assert math.copysign(1.0, bounds_violation(traj, 1.0, 1.0)) == 1.0
    traj.add_snapshot(0.1, {"u": np.full(n, 1.25), "v": np.full(n, -0.5)})
    assert bounds_violation(traj, 1.0, 1.0) == pytest.approx(0.5)


def test_limit_against_its_own_parts():
    spec = small()
    lt = limit_trajectory_for(spec)
    d = compare_to_limit(lt, lt)
    assert d.total == 0.0


def test_grid_mismatch():
    a = limit_trajectory_for(small())
    b = limit_trajectory_for(small(resolution=50))
    with pytest.raises(InvalidParameter):
        compare_to_limit(a, b)
    c = solve_limit(limit_spec_from(small(snapshot_count=5)))
    with pytest.raises(InvalidParameter):
        compare_to_limit(a, c)


@pytest.mark.parametrize("domain", ["half_line", "whole_line"])
def test_refinement_changes_distance_little(domain):
    d = []
    for res in (100, 200):
        spec = ProblemSpec(domain=domain, k=100.0, resolution=res)
        d.append(compare_to_limit(solve_system(spec), limit_trajectory_for(spec)).total)
    assert abs(d[1] - d[0]) / d[0] <= 0.2


def test_comparison_zero_perturbation():
    v = comparison_test(small(), Perturbation("none"))
    assert v.ordered and v.worst_u == 0.0 and v.worst_v == 0.0


@pytest.mark.parametrize("eps", [0.0, 0.5])
def test_comparison_raised_u(eps):
    v = comparison_test(small(epsilon=eps), Perturbation("raise_u", 0.1, 0.5, 0.5))
    assert v.ordered, (v.worst_u, v.worst_v)


@pytest.mark.parametrize("eps", [0.0, 0.5])
def test_comparison_lowered_v(eps):
    v = comparison_test(small(epsilon=eps), Perturbation("lower_v", 1.0, 0.8, 0.4))
    assert v.ordered, (v.worst_u, v.worst_v)
    assert v.front_advances


def test_perturbation_validation_and_draws():
    with pytest.raises(InvalidParameter):
        Perturbation("twist")
    spec = small()
    a = random_perturbations(np.random.default_rng(7), spec)
    b = random_perturbations(np.random.default_rng(7), spec)
    assert a == b and len(a) == 5


def test_translate_exponents():
    spec = ProblemSpec(domain="half_line", k=100.0, epsilon=0.5)
    fits = measure(solve_system(spec), spec).translate_fits
    for name in ("space_u", "space_v"):
        assert fits[name] == pytest.approx(1.0, abs=0.2)
    assert fits["time_u"] == pytest.approx(0.5, abs=0.2)
    # fast-decaying v side: the estimate only bounds the modulus from above
    assert fits["time_v"] >= 0.3


def test_report_determinism():
    spec = small(epsilon=0.5)
    a = measure(solve_system(spec), spec, limit_trajectory_for(spec)).to_ndjson()
    b = measure(solve_system(spec), spec, limit_trajectory_for(spec)).to_ndjson()
    assert a == b


def test_quadrature_consistency():
    reps = []
    for n in (50, 100):
        spec = ProblemSpec(domain="half_line", k=100.0, snapshot_count=n)
        reps.append(measure(solve_system(spec), spec, limit_trajectory_for(spec)))
    a, b = reps
    for name in ("reaction_mass", "segregation_norm", "grad_sq"):
        assert getattr(b, name) == pytest.approx(getattr(a, name), rel=1e-2)
    assert b.convergence_to_limit["total"] == pytest.approx(a.convergence_to_limit["total"], rel=1e-2)


def test_report_roundtrip():
    spec = small()
    rep = measure(solve_system(spec), spec)
    back = DiagnosticsReport.from_dict(json.loads(rep.to_ndjson()))
    assert back.to_ndjson() == rep.to_ndjson()
    assert "reaction_mass" in rep.summary()
    with pytest.raises(InvalidParameter):
        DiagnosticsReport.from_dict({"k": 1.0})


def _grad_case(domain, eps):
    marks = []
    if (domain, eps) == ("half_line", 0.5):
        marks = [pytest.mark.xfail(strict=True, reason="measured spread 1.54 at h=1/200")]
    return pytest.param(domain, eps, marks=marks, id=f"{domain}-eps{eps:g}")


@pytest.mark.parametrize("domain, eps", [_grad_case(d, e) for d in STANDARD_DOMAINS for e in STANDARD_EPS])
def test_gradient_energy_uniform_in_k(standard_suite, domain, eps):
    g = [standard_suite[(domain, eps, k)].grad_sq for k in STANDARD_K]
    assert max(g) / min(g) <= 1.5


def test_short_series_has_no_time_exponent():
    spec = small(snapshot_count=2)
    fits = measure(solve_system(spec), spec).translate_fits
    assert math.isnan(fits["time_u"]) and math.isnan(fits["time_v"])
    assert fits["space_u"] == pytest.approx(1.0, abs=0.2)
    spec = small(snapshot_count=3)
    fits = measure(solve_system(spec), spec).translate_fits
    assert len(fits["time_scales"]) == 2
