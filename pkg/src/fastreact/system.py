"""Finite-k coupled system u_t = phi(u)_xx - kuv, v_t = eps*phi(v)_xx - kuv.

Each backward-Euler step is solved by the monotone decoupled iteration: start
from the constant majorant v^(0) = V0, then alternate a scalar u-solve with
absorption k*v^(m-1) and a scalar v-solve with absorption k*u^(m).  The
u-iterates increase and the v-iterates decrease, so both traces are checked.
"""

from __future__ import annotations

import logging
import warnings
from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidParameter, StepFailure
from .problem import (
    HALF_LINE,
    Field,
    ProblemSpec,
    Trajectory,
    build_initial_data,
    truncate_initial_data,
)
from .stepper import NEUMANN, BoundaryCondition, dirichlet, march, solve_step

log = logging.getLogger(__name__)


@dataclass
class IterationTrace:
    du: list = field(default_factory=list)
    dv: list = field(default_factory=list)
    iterations: int = 0
    u_monotone: bool = True
    v_monotone: bool = True
    worst_violation: float = 0.0
    newton_iters: int = 0

    @property
    def monotone(self) -> bool:
        return self.u_monotone and self.v_monotone


def boundary_conditions(spec: ProblemSpec):
    if spec.domain == HALF_LINE:
        return BoundaryCondition(dirichlet(spec.U0), NEUMANN), BoundaryCondition(NEUMANN, NEUMANN)
    return BoundaryCondition(), BoundaryCondition()


def _coupled(u_old, v_old, spec: ProblemSpec, dt, bc_u, bc_v, h, u_guess=None):
    tol = spec.tolerances
    k = spec.k
    law = spec.law
    slack = 10.0 * tol.picard_tol
    trace = IterationTrace()
    v_prev = np.full_like(v_old, spec.V0)
    u_prev = None
    guess = u_old if u_guess is None else u_guess
    for m in range(1, tol.max_picard + 1):
        u_m, rep = solve_step(u_old, law, dt, h, bc_u, k * np.maximum(v_prev, 0.0), tol.newton_tol,
                              tol.max_inner_iters, guess=guess)
        trace.newton_iters += rep.newton_iters
        if spec.epsilon > 0:
            v_m, rep_v = solve_step(v_old, law, dt, h, bc_v, k * np.maximum(u_m, 0.0), tol.newton_tol,
                                    tol.max_inner_iters, diffusivity=spec.epsilon, guess=v_prev)
            trace.newton_iters += rep_v.newton_iters
        else:
            v_m = v_old / (1.0 + dt * k * np.maximum(u_m, 0.0))
        ref = u_old if u_prev is None else u_prev
        du = float(np.max(np.abs(u_m - ref)))
        dv = float(np.max(np.abs(v_m - v_prev)))
        trace.du.append(du)
        trace.dv.append(dv)
        if u_prev is not None:
            drop = float(np.max(u_prev - u_m))
            if drop > slack:
                trace.u_monotone = False
                trace.worst_violation = max(trace.worst_violation, drop)
        rise = float(np.max(v_m - v_prev))
        if rise > slack:
            trace.v_monotone = False
            trace.worst_violation = max(trace.worst_violation, rise)
        trace.iterations = m
        u_prev, v_prev, guess = u_m, v_m, u_m
        if m >= 2 and du <= tol.picard_tol and dv <= tol.picard_tol:
            if not trace.monotone:
                warnings.warn(
                    f"monotone iteration violated by {trace.worst_violation:.3e}", RuntimeWarning
                )
            return u_m, v_m, trace
    raise StepFailure(
        f"coupled iteration did not converge in {tol.max_picard} sweeps "
        f"(du={trace.du[-1]:.3e}, dv={trace.dv[-1]:.3e})",
        residual=max(trace.du[-1], trace.dv[-1]),
    )


def coupled_step(u: Field, v: Field, spec: ProblemSpec, dt):
    """One backward-Euler step of the coupled system via the monotone iteration."""
    if not dt > 0:
        raise InvalidParameter(f"time step must be positive (got {dt})", field="dt")
    if np.any(u.values < -1e-12) or np.any(v.values < -1e-12):
        raise InvalidParameter("coupled_step needs nonnegative u and v")
    bc_u, bc_v = boundary_conditions(spec)
    un, vn, trace = _coupled(u.values, v.values, spec, dt, bc_u, bc_v, u.grid.h)
    return Field(u.grid, un, u.time + dt), Field(v.grid, vn, v.time + dt), trace


def initial_state(spec: ProblemSpec):
    u0, v0 = build_initial_data(spec)
    if spec.radius > 2:
        u0, v0 = truncate_initial_data(u0, v0, spec.radius, spec.V0, spec.U0)
    return u0, v0


def solve_system(spec: ProblemSpec, initial=None, every_step=False) -> Trajectory:
    """March the coupled system to T, recording snapshots and per-step tallies.

    ``initial`` optionally overrides the constructed (u0, v0) pair (arrays or
    Fields on ``spec.grid``).
    """
    grid = spec.grid
    h = grid.h
    if initial is None:
        u0, v0 = initial_state(spec)
        u0, v0 = u0.values, v0.values
    else:
        u0, v0 = (np.asarray(getattr(f, "values", f), dtype=float) for f in initial)
    bc_u, bc_v = boundary_conditions(spec)
    k = spec.k
    law = spec.law
    traj = Trajectory(grid, kind="system", k=k)
    traj.add_snapshot(0.0, {"u": u0, "v": v0})
    tallies = {"mass": 0.0, "seg": 0.0, "flux_w": 0.0, "far": 0.0, "grad": 0.0}

    def step(state, t, dt):
        u_old, v_old, u_guess = state
        un, vn, trace = _coupled(u_old, v_old, spec, dt, bc_u, bc_v, h, u_guess)
        return (un, vn, 2.0 * un - u_old), trace

    def accept(state, trace, t, dt, at_stop):
        un, vn, _ = state
        seg = float(np.sum(un * vn) * h)
        tallies["seg"] += dt * seg
        tallies["mass"] += dt * k * seg
        Pu = law.potential(un)
        if bc_u.left.kind == "dirichlet":
            qu_left = 2.0 * (Pu[0] - float(law.potential(bc_u.left.value))) / h
        else:
            qu_left = 0.0
        # diffusive flux through the face next to each artificial (zero-flux) edge
        Pv = spec.epsilon * law.potential(vn)
        mon_right = max(abs(Pu[-1] - Pu[-2]), abs(Pv[-1] - Pv[-2])) / h
        if spec.domain == HALF_LINE:
            mon_left = 0.0
        else:
            mon_left = max(abs(Pu[1] - Pu[0]), abs(Pv[1] - Pv[0])) / h
        monitor = max(mon_left, mon_right)
        tallies["far"] = max(tallies["far"], monitor)
        tallies["flux_w"] += dt * (0.0 - qu_left)
        g = np.diff(Pu) / h
        tallies["grad"] += dt * (float(np.sum(g * g)) * h + 0.5 * h * qu_left ** 2)
        traj.boundary_flux_log.append(
            {"t": t, "u_left": qu_left, "u_right": 0.0, "v_left": 0.0, "v_right": 0.0,
             "far_field_monitor": monitor}
        )
        traj.steps.append(
            {"t": t, "dt": dt, "picard_iters": trace.iterations, "newton_iters": trace.newton_iters,
             "reaction_mass": tallies["mass"], "monotone": trace.monotone}
        )
        if not trace.monotone:
            traj.monotonicity_violations += 1
        if every_step or at_stop:
            traj.add_snapshot(t, {"u": un, "v": vn}, tallies["mass"], tallies["seg"])

    march((u0, v0, None), 0.0, spec.T, spec.snapshot_times(), spec.dt_control, spec.dt_init,
          step, accept)
    traj.boundary_flux_integral = tallies["flux_w"]
    traj.far_field_monitor = tallies["far"]
    traj.grad_sq_integral = tallies["grad"]
    return traj


# -- weak-form residual -------------------------------------------------------------


@dataclass
class WeakResidual:
    u: float
    v: float
    per_test: list

    @property
    def max(self) -> float:
        return max(self.u, self.v)


def _test_family(spec: ProblemSpec, size: int):
    """Separable test functions X_j(x) theta_l(t) with 1 <= j, l <= size.

    Spatial factors vanish at the Dirichlet end (half-line) and have zero slope
    at zero-flux ends; time factors vanish at t = T.  Each entry carries X,
    theta and its first two antiderivatives.
    """
    R, T = spec.radius, spec.T
    out = []
    for j in range(1, size + 1):
        if spec.domain == HALF_LINE:
            wj = (j - 0.5) * np.pi / R
            X = (lambda x, w=wj: np.sin(w * x))
        else:
            wj = j * np.pi / (2.0 * R)
            X = (lambda x, w=wj: np.cos(w * (x + R)))
        for l in range(1, size + 1):
            wl = (l - 0.5) * np.pi / T
            th = (lambda t, w=wl: np.cos(w * t))
            th1 = (lambda t, w=wl: np.sin(w * t) / w)
            th2 = (lambda t, w=wl: -np.cos(w * t) / w ** 2)
            out.append((j, l, X, th, th1, th2))
    return out


def _hat_weights(t, th, th1, th2):
    """Exact integrals of the linear hat functions on each interval against theta
    and theta'.  Returns (A0, A1, J0, J1): A against theta', J against theta,
    index 0 for the left node, 1 for the right."""
    t0, t1 = t[:-1], t[1:]
    d = t1 - t0
    I = th1(t1) - th1(t0)
    J1 = (d * th1(t1) - (th2(t1) - th2(t0))) / d
    J0 = I - J1
    A1 = th(t1) - I / d
    A0 = I / d - th(t0)
    return A0, A1, J0, J1


def weak_residual(traj: Trajectory, spec: ProblemSpec, test_family_size: int = 3) -> WeakResidual:
    """Residual of both equations' weak forms on a solved trajectory.

    The trajectory is interpolated linearly in time between snapshots and the
    products with the time factor are integrated exactly; space integrals use
    the cell midpoint rule, except the gradient pairing, which is exact for the
    piecewise-linear interpolant of phi.  Expect O(dt + h^2) on solved runs.
    """
    if len(traj) < 2:
        raise InvalidParameter("weak_residual needs at least two snapshots")
    grid = traj.grid
    h = grid.h
    x = grid.centers
    law = spec.law
    t = traj.time_array
    U = traj.array("u")
    V = traj.array("v")
    left_u = float(law.potential(spec.U0)) if spec.domain == HALF_LINE else None
    nodes_u, su = _grad_pairing_nodes(law.potential(U), grid, left_u)
    nodes_v, sv = _grad_pairing_nodes(spec.epsilon * law.potential(V), grid, None)
    react = spec.k * U * V
    res_u = res_v = 0.0
    rows = []
    for j, l, X, th, th1, th2 in _test_family(spec, test_family_size):
        Xc = X(x)
        A0, A1, J0, J1 = _hat_weights(t, th, th1, th2)
        mr = react @ Xc * h
        out = []
        for mass, flux in ((U @ Xc * h, su @ (X(nodes_u[1:]) - X(nodes_u[:-1]))),
                           (V @ Xc * h, sv @ (X(nodes_v[1:]) - X(nodes_v[:-1])))):
            g = flux + mr
            r = th(t[0]) * mass[0] + np.sum(A0 * mass[:-1] + A1 * mass[1:] - J0 * g[:-1] - J1 * g[1:])
            out.append(float(r))
        rows.append({"j": j, "l": l, "u": out[0], "v": out[1]})
        res_u = max(res_u, abs(out[0]))
        res_v = max(res_v, abs(out[1]))
    return WeakResidual(res_u, res_v, rows)


def _grad_pairing_nodes(P, grid, left_value):
    """Slopes (per snapshot row) of the piecewise-linear interpolant of P."""
    xs = grid.centers
    if left_value is not None:
        nodes = np.concatenate(([grid.left], xs))
        vals = np.concatenate((np.full((P.shape[0], 1), left_value), P), axis=1)
    else:
        nodes, vals = xs, P
    slopes = np.diff(vals, axis=1) / np.diff(nodes)
    return nodes, slopes


def shuffled(traj: Trajectory, seed: int = 0) -> Trajectory:
    """Negative control: the same snapshots with all but the first in random order."""
    rng = np.random.default_rng(seed)
    perm = np.concatenate(([0], 1 + rng.permutation(len(traj) - 1)))
    out = Trajectory(traj.grid, kind=traj.kind, k=traj.k)
    for i, t in enumerate(traj.times):
        out.add_snapshot(t, {name: traj.fields[name][perm[i]] for name in traj.fields})
    return out
