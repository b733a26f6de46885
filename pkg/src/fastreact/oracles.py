"""Closed-form reference solutions and the small oracle suites built on them."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import solve_ivp
from scipy.optimize import brentq
from scipy.special import erf, erfc

from .errors import InvalidParameter
from .laws import linear_oracle_law, power_law
from .problem import DtControl, Field, ProblemSpec, make_grid
from .stepper import NEUMANN, BoundaryCondition, adaptive_advance, dirichlet


def heat_dirichlet(x, t, U0=1.0):
    """c_t = c_xx on x > 0, c(0,t) = U0, c(x,0) = 0."""
    return U0 * erfc(np.asarray(x, dtype=float) / (2.0 * math.sqrt(t)))


def barenblatt(x, t, m=2.0, mass_constant=1.0):
    """Source-type solution of c_t = (c^m)_xx in one dimension.

    c = t^(-a) (C - b (m-1)/(2m) x^2 t^(-2a))_+^(1/(m-1)) with a = 1/(m+1), b = a.
    """
    x = np.asarray(x, dtype=float)
    a = 1.0 / (m + 1.0)
    core = mass_constant - a * (m - 1.0) / (2.0 * m) * x ** 2 * t ** (-2.0 * a)
    return t ** (-a) * np.maximum(core, 0.0) ** (1.0 / (m - 1.0))


def ode_decay(t, y0, k):
    """Exact solution of y' = -k y^2."""
    return y0 / (1.0 + k * y0 * t)


def ode_backward_euler(y0, k, dt):
    """One implicit Euler step of y' = -k y^2: the positive root of dt k y^2 + y - y0 = 0."""
    a = dt * k
    if a == 0:
        return float(y0)
    return float((-1.0 + math.sqrt(1.0 + 4.0 * a * y0)) / (2.0 * a))


def ode_pair_reference(u0, v0, k, dt, rtol=1e-12, atol=1e-14):
    """High-accuracy integration of u' = v' = -k u v over one step."""
    sol = solve_ivp(lambda t, y: [-k * y[0] * y[1], -k * y[0] * y[1]], (0.0, dt), [u0, v0],
                    method="DOP853", rtol=rtol, atol=atol)
    return float(sol.y[0, -1]), float(sol.y[1, -1])


def stefan_coefficient(U0, V0):
    """Front coefficient a of the linear-diffusion segregation limit on the half-line.

    With w = U0 (1 - erf(eta/2)/erf(a/2)) for eta < a and v ahead of the front
    held at V0 (one mobile reactant), a solves V0 a / 2 = U0 exp(-a^2/4) / (sqrt(pi) erf(a/2)).
    """
    if not (U0 > 0 and V0 > 0):
        raise InvalidParameter("U0 and V0 must be positive")
    g = lambda a: V0 * a / 2.0 - U0 * math.exp(-a * a / 4.0) / (math.sqrt(math.pi) * erf(a / 2.0))
    return brentq(g, 1e-8, 50.0, xtol=1e-14)


def stefan_profile(eta, U0, V0, a=None):
    """Self-similar limit profile w(eta), eta = x / sqrt(t), for linear diffusion, eps = 0."""
    if a is None:
        a = stefan_coefficient(U0, V0)
    eta = np.asarray(eta, dtype=float)
    inside = U0 * (1.0 - erf(eta / 2.0) / erf(a / 2.0))
    return np.where(eta < a, inside, -V0)


# -- oracle suites -----------------------------------------------------------------


@dataclass
class OracleResult:
    name: str
    error: float
    tolerance: float

    @property
    def passed(self) -> bool:
        return bool(self.error <= self.tolerance)

    def line(self) -> str:
        verdict = "PASS" if self.passed else "FAIL"
        return f"{verdict} {self.name}: error {self.error:.3e} (tolerance {self.tolerance:g})"


def heat_oracle(resolution=200, R=4.0, t_end=0.25, dt_max=1e-4) -> OracleResult:
    """Linear law, Dirichlet U0 = 1 at x = 0, zero data; L1 error at t_end."""
    grid = make_grid("half_line", R, int(round(R * resolution)))
    c0 = Field(grid, np.zeros(grid.cell_count))
    traj = adaptive_advance(c0, linear_oracle_law(), t_end, BoundaryCondition(dirichlet(1.0), NEUMANN),
                            dt_control=DtControl(dt_max=dt_max))
    err = float(np.sum(np.abs(traj.fields["c"][-1] - heat_dirichlet(grid.centers, t_end))) * grid.h)
    return OracleResult("heat", err, 1e-3)


def barenblatt_oracle(resolution=400, R=6.0, t0=1.0, t1=2.0, dt_max=1e-3) -> OracleResult:
    """m = 2 on (-R, R) from the source solution at t0; relative L1 error at t1."""
    grid = make_grid("whole_line", R, int(round(2 * R * resolution)))
    x = grid.centers
    c0 = Field(grid, barenblatt(x, t0), t0)
    traj = adaptive_advance(c0, power_law(2.0), t1, BoundaryCondition(),
                            dt_control=DtControl(dt_init=dt_max, dt_max=dt_max))
    exact = barenblatt(x, t1)
    err = float(np.sum(np.abs(traj.fields["c"][-1] - exact)) / np.sum(np.abs(exact)))
    return OracleResult("barenblatt", err, 2e-2)


def ode_oracle(k=10.0, dt=1e-3) -> OracleResult:
    """Uniform u = v = 1 with zero flux: one coupled step against the implicit-Euler root."""
    from .system import coupled_step

    spec = ProblemSpec(domain="whole_line", R=4.0, k=k, cells=16, epsilon=0.0)
    grid = spec.grid
    u = Field(grid, np.ones(grid.cell_count))
    v = Field(grid, np.ones(grid.cell_count))
    un, vn, _ = coupled_step(u, v, spec, dt)
    ref = ode_backward_euler(1.0, k, dt)
    err = max(float(np.max(np.abs(un.values - ref))), float(np.max(np.abs(vn.values - ref)))) / ref
    return OracleResult("ode", err, 1e-6)


def stefan_oracle(resolution=400, R=8.0, T=0.5) -> OracleResult:
    """Linear-law half-line limit problem, eps = 0: profile against the similarity solution."""
    from .limit import limit_spec_from, solve_limit

    spec = ProblemSpec(domain="half_line", R=R, T=T, law=linear_oracle_law(), resolution=resolution,
                       snapshot_count=10)
    traj = solve_limit(limit_spec_from(spec))
    x = spec.grid.centers
    errs = []
    for t, w in zip(traj.times[1:], traj.fields["w"][1:]):
        if t < 0.1 * T:
            continue
        errs.append(float(np.sum(np.abs(w - stefan_profile(x / math.sqrt(t), 1.0, 1.0))) * spec.grid.h
                          / math.sqrt(t)))
    return OracleResult("stefan", max(errs), 1e-2)


ORACLES = {
    "heat": heat_oracle,
    "barenblatt": barenblatt_oracle,
    "ode": ode_oracle,
    "stefan": stefan_oracle,
}


def run_oracles(names=None):
    names = list(ORACLES) if names in (None, "all") else list(names)
    unknown = [n for n in names if n not in ORACLES]
    if unknown:
        raise InvalidParameter(f"unknown oracle(s) {unknown}; choose from {sorted(ORACLES)}")
    return [ORACLES[n]() for n in names]
