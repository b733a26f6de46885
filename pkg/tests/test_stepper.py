import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from fastreact.errors import InvalidParameter
from fastreact.laws import power_law
from fastreact.oracles import barenblatt_oracle, heat_oracle
from fastreact.problem import DtControl, Field, make_grid
from fastreact.stepper import NEUMANN, BoundaryCondition, adaptive_advance, dirichlet, implicit_step

GRID = make_grid("half_line", 2.0, 64)
LAW = power_law(2.0)


def test_constant_is_steady():
    c = Field(GRID, np.full(GRID.cell_count, 0.6))
    new, rep = implicit_step(c, LAW, 1e-2, BoundaryCondition())
    np.testing.assert_allclose(new.values, 0.6, rtol=0, atol=1e-14)
    assert rep.residual <= 1e-12


@pytest.mark.parametrize("k0, dt", [(1.0, 1e-3), (10.0, 1e-2), (1e3, 0.5)])
def test_uniform_absorption_is_implicit_euler(k0, dt):
    c = Field(GRID, np.ones(GRID.cell_count))
    new, _ = implicit_step(c, LAW, dt, BoundaryCondition(), absorption=np.full(GRID.cell_count, k0))
    np.testing.assert_allclose(new.values, 1.0 / (1.0 + k0 * dt), rtol=1e-12)


def test_dirichlet_entry_stays_in_bounds():
    c = Field(GRID, np.zeros(GRID.cell_count))
    new, _ = implicit_step(c, LAW, 1e-3, BoundaryCondition(dirichlet(1.0), NEUMANN))
    assert np.all(new.values >= 0.0)
    assert np.all(new.values <= 1.0)
    assert new.values[0] > 0.0


def test_bad_dt():
    c = Field(GRID, np.zeros(GRID.cell_count))
    with pytest.raises(InvalidParameter):
        implicit_step(c, LAW, 0.0, BoundaryCondition())
    with pytest.raises(InvalidParameter):
        implicit_step(c, LAW, 1e-3, BoundaryCondition(), absorption=-np.ones(GRID.cell_count))


profiles = st.lists(st.floats(0.0, 1.0), min_size=64, max_size=64).map(np.array)


@settings(max_examples=40, deadline=None)
@given(c=profiles, dt=st.floats(1e-5, 1e-1), k0=st.floats(0.0, 100.0))
def test_bounds_and_mass(c, dt, k0):
    f = Field(GRID, c)
    new, _ = implicit_step(f, LAW, dt, BoundaryCondition())
    assert np.all(new.values >= 0.0)
    assert np.all(new.values <= c.max() + 1e-12)
    # zero flux and zero absorption: mass is conserved
    assert abs(np.sum(new.values) - np.sum(c)) * GRID.h <= 1e-10 * max(1.0, np.sum(c) * GRID.h)
    if k0 > 0:
        absorbed, _ = implicit_step(f, LAW, dt, BoundaryCondition(), absorption=np.full(64, k0))
        assert np.all(absorbed.values <= new.values + 1e-12)


@settings(max_examples=40, deadline=None)
@given(c=profiles, bump=profiles, dt=st.floats(1e-5, 1e-1))
def test_comparison(c, bump, dt):
    lo = Field(GRID, c)
    hi = Field(GRID, np.minimum(c + bump, 1.0))
    bc = BoundaryCondition(dirichlet(1.0), NEUMANN)
    a, _ = implicit_step(lo, LAW, dt, bc)
    b, _ = implicit_step(hi, LAW, dt, bc)
    assert np.all(b.values >= a.values - 1e-10)


def test_boundary_flux_ledger():
    c = Field(GRID, np.zeros(GRID.cell_count))
    traj = adaptive_advance(c, LAW, 0.1, BoundaryCondition(dirichlet(1.0), NEUMANN),
                            dt_control=DtControl(dt_max=1e-3))
    inflow = sum(rec["dt"] * (rec["right"] - rec["left"]) for rec in traj.boundary_flux_log)
    mass = np.sum(traj.fields["c"][-1]) * GRID.h
    assert mass == pytest.approx(inflow, rel=1e-9)


def test_heat_oracle():
    res = heat_oracle()
    assert res.error <= 1e-3, res.line()


def test_barenblatt_oracle():
    res = barenblatt_oracle()
    assert res.error <= 2e-2, res.line()
