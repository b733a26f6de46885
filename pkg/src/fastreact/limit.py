"""Scalar limit problem w_t = D(w)_xx and the free-boundary measurements on it.

``u = w+`` and ``v = -w-`` recover the segregated pair.  On the half-line w is
held at U0 at x = 0 and starts from -V0; on the whole line it starts from the
Riemann step U0 | -V0 with zero flux at both ends.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidParameter
from .laws import LimitFlux
from .problem import (
    HALF_LINE,
    DtControl,
    Field,
    Grid1D,
    ProblemSpec,
    SolverTolerances,
    Trajectory,
)
from .stepper import NEUMANN, BoundaryCondition, dirichlet, march, solve_step

MUSHY_TOL = 1e-10


@dataclass(frozen=True, eq=False)
class LimitSpec:
    domain: str
    grid: Grid1D
    T: float
    flux: LimitFlux
    w0: np.ndarray
    U0: float
    V0: float
    tolerances: SolverTolerances = field(default_factory=SolverTolerances)
    dt_control: DtControl = field(default_factory=DtControl)
    snapshot_count: int = 50

    def __post_init__(self):
        w0 = np.asarray(self.w0, dtype=float)
        if w0.shape != (self.grid.cell_count,):
            raise InvalidParameter("w0 does not match the grid", field="w0")
        if np.any(w0 < -self.V0 - 1e-12) or np.any(w0 > self.U0 + 1e-12):
            raise InvalidParameter("w0 must lie in [-V0, U0]", field="w0")
        if not self.T > 0:
            raise InvalidParameter(f"T must be positive (got {self.T})", field="T")
        object.__setattr__(self, "w0", w0)

    @property
    def bc(self) -> BoundaryCondition:
        if self.domain == HALF_LINE:
            return BoundaryCondition(dirichlet(self.U0), NEUMANN)
        return BoundaryCondition()

    @property
    def dt_init(self) -> float:
        # the corner/step layer is resolved with a first step no larger than h^2
        h2 = self.grid.h ** 2
        if self.dt_control.dt_init is not None:
            return min(self.dt_control.dt_init, h2)
        return min(h2, self.dt_control.dt_max)

    def snapshot_times(self) -> np.ndarray:
        return self.T * np.arange(1, self.snapshot_count + 1) / self.snapshot_count

    def with_(self, **changes) -> "LimitSpec":
        return replace(self, **changes)


def step_limit_data(grid: Grid1D, domain: str, U0: float, V0: float) -> np.ndarray:
    if domain == HALF_LINE:
        return np.full(grid.cell_count, -float(V0))
    return np.where(grid.centers < 0.0, float(U0), -float(V0))


def limit_spec_from(spec: ProblemSpec, w0=None) -> LimitSpec:
    """The limit problem matching a finite-k run (same grid, times and controls)."""
    grid = spec.grid
    if w0 is None:
        w0 = step_limit_data(grid, spec.domain, spec.U0, spec.V0)
    return LimitSpec(
        domain=spec.domain,
        grid=grid,
        T=spec.T,
        flux=LimitFlux(spec.law.base, spec.epsilon),
        w0=np.asarray(getattr(w0, "values", w0), dtype=float),
        U0=spec.U0,
        V0=spec.V0,
        tolerances=spec.tolerances,
        dt_control=spec.dt_control,
        snapshot_count=spec.snapshot_count,
    )


def positive_negative_parts(w: Field):
    vals = w.values
    u = np.maximum(vals, 0.0)
    v = np.maximum(-vals, 0.0)
    return Field(w.grid, u, w.time), Field(w.grid, v, w.time)


def solve_limit(spec: LimitSpec, every_step: bool = False, dt_first: float | None = None) -> Trajectory:
    """March w to T; snapshots carry w and its parts u = w+, v = -w-."""
    grid = spec.grid
    h = grid.h
    bc = spec.bc
    tol = spec.tolerances
    traj = Trajectory(grid, kind="limit")

    def record(t, w):
        traj.add_snapshot(t, {"w": w, "u": np.maximum(w, 0.0), "v": np.maximum(-w, 0.0)})

    record(0.0, spec.w0)

    def step(state, t, dt):
        w_old, guess = state
        w, rep = solve_step(w_old, spec.flux, dt, h, bc, None, tol.newton_tol,
                            tol.max_inner_iters, guess=guess)
        return (w, 2.0 * w - w_old), rep

    def accept(state, rep, t, dt, at_stop):
        traj.steps.append({"t": t, "dt": dt, "newton_iters": rep.newton_iters, "method": rep.method})
        traj.boundary_flux_log.append({"t": t, "left": rep.flux_left, "right": rep.flux_right})
        if every_step or at_stop:
            record(t, state[0])

    first = spec.dt_init if dt_first is None else dt_first
    march((spec.w0.copy(), None), 0.0, spec.T, spec.snapshot_times(), spec.dt_control, first,
          step, accept)
    return traj


# -- free boundary ----------------------------------------------------------------


@dataclass
class FrontFit:
    times: list
    positions: list
    intervals: list
    absent: list
    exponent: float = float("nan")
    coefficient: float = float("nan")
    residual: float = float("nan")

    def records(self):
        return [
            {"t": t, "position": p, "interval": iv, "absent": a}
            for t, p, iv, a in zip(self.times, self.positions, self.intervals, self.absent)
        ]


def front_position(x: np.ndarray, w: np.ndarray, tol: float = MUSHY_TOL):
    """Zero crossing of w from the positive to the negative side.

    Returns (position, interval) or (None, None) when w has one sign.  A run of
    cells with |w| <= tol between the two sides is a mushy interval; its
    midpoint is taken as the front.
    """
    pos = np.flatnonzero(w > tol)
    neg = np.flatnonzero(w < -tol)
    if pos.size == 0 or neg.size == 0:
        return None, None
    if pos[0] < neg[0]:
        # positive on the left: last positive cell before the first negative one
        i = pos[pos < neg[0]][-1]
        j = neg[0]
    else:
        j = neg[neg < pos[0]][-1]
        i = pos[0]
    a, b = min(i, j), max(i, j)
    if b - a == 1:
        # secant through the two cells that straddle zero
        p = x[a] - w[a] * (x[b] - x[a]) / (w[b] - w[a])
        return float(p), (float(p), float(p))
    lo = x[a] - w[a] * (x[a + 1] - x[a]) / (w[a + 1] - w[a])
    hi = x[b - 1] - w[b - 1] * (x[b] - x[b - 1]) / (w[b] - w[b - 1])
    return 0.5 * (lo + hi), (float(lo), float(hi))


def extract_front(traj: Trajectory, field_name: str = "w") -> FrontFit:
    """Front positions per snapshot and a power-law fit, position ~ a t^p.

    The fit uses the snapshots in the second half of the time range.  On the
    whole line the fit runs on |position| and a carries the sign of the
    positions (a > 0: the u-phase advances into x > 0).
    """
    x = traj.grid.centers
    fit = FrontFit([], [], [], [])
    if field_name in traj.fields:
        series = traj.fields[field_name]
    else:
        # a system trajectory: the signed profile is u - v
        series = [u - v for u, v in zip(traj.fields["u"], traj.fields["v"])]
    for t, w in zip(traj.times, series):
        p, iv = front_position(x, np.asarray(w))
        fit.times.append(float(t))
        fit.positions.append(p)
        fit.intervals.append(iv)
        fit.absent.append(p is None)
    t = np.asarray(fit.times)
    half = 0.5 * (t[0] + t[-1])
    sel = [i for i, ti in enumerate(t) if ti >= half and ti > 0 and fit.positions[i] is not None
           and abs(fit.positions[i]) > 0]
    if len(sel) >= 2:
        pos = np.array([fit.positions[i] for i in sel])
        lt = np.log(t[sel])
        lp = np.log(np.abs(pos))
        A = np.column_stack([lt, np.ones_like(lt)])
        (p, c), *_ = np.linalg.lstsq(A, lp, rcond=None)
        sign = float(np.sign(np.median(pos)))
        fit.exponent = float(p)
        fit.coefficient = sign * float(np.exp(c))
        fit.residual = float(np.sqrt(np.mean((A @ np.array([p, c]) - lp) ** 2)))
    return fit


# -- contraction and similarity -----------------------------------------------------


@dataclass
class ContractionReport:
    times: np.ndarray
    distances: np.ndarray
    initial_distance: float
    ratios: np.ndarray

    @property
    def max_ratio(self) -> float:
        return float(np.max(self.ratios)) if self.ratios.size else 0.0

    @property
    def contractive(self) -> bool:
        return self.max_ratio <= 1.05


def l1_contraction_check(spec: LimitSpec, w0_a, w0_b) -> ContractionReport:
    """Run the limit problem from two data and compare L1 distances over time."""
    wa = np.asarray(getattr(w0_a, "values", w0_a), dtype=float)
    wb = np.asarray(getattr(w0_b, "values", w0_b), dtype=float)
    h = spec.grid.h
    d0 = float(np.sum(np.abs(wa - wb)) * h)
    ta = solve_limit(spec.with_(w0=wa))
    tb = solve_limit(spec.with_(w0=wb))
    d = np.sum(np.abs(ta.array("w") - tb.array("w")), axis=1) * h
    # 0/0 is read as 0: identical data stay identical
    ratios = d / d0 if d0 > 0 else np.zeros_like(d)
    return ContractionReport(ta.time_array, d, d0, ratios)


def self_similar_collapse(traj: Trajectory, field_name: str = "w", eta_points: int = 400,
                          exclude_fraction: float = 0.1) -> float:
    """Largest pairwise L1 difference of snapshots rescaled to eta = x / sqrt(t).

    Snapshots before ``exclude_fraction * T`` are ignored.  Profiles are
    compared on the eta-range seen by every kept snapshot.
    """
    t = traj.time_array
    T = t[-1]
    keep = [i for i, ti in enumerate(t) if ti >= exclude_fraction * T and ti > 0]
    if len(keep) < 3:
        raise InvalidParameter("self_similar_collapse needs at least 3 snapshots after the initial layer")
    if t[keep[-1]] / t[keep[0]] < 2.0 - 1e-12:
        raise InvalidParameter("self_similar_collapse needs snapshot times spanning a ratio of at least 2")
    x = traj.grid.centers
    etas = [x / np.sqrt(t[i]) for i in keep]
    lo = max(e[0] for e in etas)
    hi = min(e[-1] for e in etas)
    eta = np.linspace(lo, hi, eta_points)
    deta = eta[1] - eta[0]
    profiles = [np.interp(eta, e, traj.fields[field_name][i]) for e, i in zip(etas, keep)]
    worst = 0.0
    for a in range(len(profiles)):
        for b in range(a + 1, len(profiles)):
            diff = np.abs(profiles[a] - profiles[b])
            worst = max(worst, float(np.sum(0.5 * (diff[1:] + diff[:-1])) * deta))
    return worst
