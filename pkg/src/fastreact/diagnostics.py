"""Measurements on trajectories: bounds, reaction and segregation integrals,
L1 and gradient bounds, translate moduli, fronts and the distance to the limit."""

from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field

import numpy as np

from .errors import InvalidParameter
from .limit import extract_front, limit_spec_from, solve_limit
from .problem import HALF_LINE, ProblemSpec, Trajectory
from .system import initial_state, solve_system

SPACE_SHIFTS = (1, 2, 4, 8)
TIME_SHIFTS = (1, 2, 4)


def trapezoid_in_time(times, values) -> float:
    t = np.asarray(times, dtype=float)
    y = np.asarray(values, dtype=float)
    if t.size < 2:
        return 0.0
    return float(np.sum(0.5 * (y[1:] + y[:-1]) * np.diff(t)))


def bounds_violation(traj: Trajectory, U0: float, V0: float) -> float:
    u = traj.array("u")
    v = traj.array("v")
    worst = max(np.max(-u), np.max(u - U0), np.max(-v), np.max(v - V0))
    return float(worst) if worst > 0 else 0.0


def far_field_targets(spec: ProblemSpec):
    """The step profiles the initial data approach (u0_inf, v0_inf)."""
    x = spec.grid.centers
    if spec.domain == HALF_LINE:
        return np.zeros_like(x), np.full_like(x, spec.V0)
    return np.where(x < 0, spec.U0, 0.0), np.where(x > 0, spec.V0, 0.0)


def grad_sq_profile(P: np.ndarray, h: float, left_value=None) -> np.ndarray:
    """Per-snapshot sum of squared face gradients of P, times h."""
    g = np.diff(P, axis=1) / h
    total = np.sum(g ** 2, axis=1) * h
    if left_value is not None:
        # half cell between the Dirichlet face and the first centre
        g0 = 2.0 * (P[:, 0] - left_value) / h
        total = total + g0 ** 2 * 0.5 * h
    return total


def _fit_exponent(scales, values) -> float:
    s = np.asarray(scales, dtype=float)
    v = np.asarray(values, dtype=float)
    ok = v > 0
    if ok.sum() < 2:
        return float("nan")
    slope, _ = np.polyfit(np.log(s[ok]), np.log(v[ok]), 1)
    return float(slope)


def space_translate_moduli(traj: Trajectory, P: np.ndarray, r_cells: int = 0, shifts=SPACE_SHIFTS):
    """L1 space-translate differences of P for cell shifts ``shifts``.

    The same window of cells (skip the first ``r_cells``) is used for every shift.
    """
    h = traj.grid.h
    n = P.shape[1]
    smax = max(shifts)
    if n - smax - r_cells < 2:
        raise InvalidParameter("grid too small for the requested translates")
    window = slice(r_cells, n - smax)
    out = []
    for s in shifts:
        d = np.sum(np.abs(P[:, r_cells + s:n - smax + s] - P[:, window]), axis=1) * h
        out.append(trapezoid_in_time(traj.times, d))
    return [s * h for s in shifts], out


def time_translate_moduli(traj: Trajectory, P: np.ndarray, shifts=TIME_SHIFTS):
    """L2(space-time) norms of snapshot-index translates of P (uniform snapshots)."""
    h = traj.grid.h
    t = traj.time_array
    if len(t) < 3 or not shifts:
        raise InvalidParameter("too few snapshots for time translates")
    dt_out = np.diff(t)
    if not np.allclose(dt_out, dt_out[0], rtol=1e-9, atol=0):
        raise InvalidParameter("time translates need uniformly spaced snapshots")
    out = []
    for j in shifts:
        if len(t) - j < 2:
            raise InvalidParameter("too few snapshots for the requested time translates")
        d = np.sum((P[j:] - P[:-j]) ** 2, axis=1) * h
        out.append(math.sqrt(trapezoid_in_time(t[:-j], d)))
    return [float(j * dt_out[0]) for j in shifts], out


@dataclass
class TranslateFits:
    space_u: float
    space_v: float
    time_u: float
    time_v: float
    space_scales: list
    time_scales: list
    space_moduli_u: list
    space_moduli_v: list
    time_moduli_u: list
    time_moduli_v: list


def translate_fits(traj: Trajectory, spec: ProblemSpec) -> TranslateFits:
    law = spec.law
    PU = law.potential(traj.array("u"))
    PV = law.potential(traj.array("v"))
    r_cells = 4 if spec.domain == HALF_LINE else 0
    ds, su = space_translate_moduli(traj, PU, r_cells)
    _, sv = space_translate_moduli(traj, PV, r_cells)
    # short or irregular snapshot series: time exponents are reported as unavailable
    shifts = tuple(j for j in TIME_SHIFTS if len(traj) - j >= 2)
    try:
        ts, tu = time_translate_moduli(traj, PU, shifts)
        _, tv = time_translate_moduli(traj, PV, shifts)
    except InvalidParameter:
        ts, tu, tv = [], [], []
    return TranslateFits(
        _fit_exponent(ds, su), _fit_exponent(ds, sv), _fit_exponent(ts, tu), _fit_exponent(ts, tv),
        ds, ts, su, sv, tu, tv,
    )


@dataclass
class LimitDistance:
    u: float
    v: float

    @property
    def total(self) -> float:
        return self.u + self.v


def compare_to_limit(sys_traj: Trajectory, limit_traj: Trajectory) -> LimitDistance:
    """Space-time L1 distances between (u^k, v^k) and (w+, -w-)."""
    if not sys_traj.grid.same_as(limit_traj.grid):
        raise InvalidParameter("system and limit trajectories live on different grids")
    if len(sys_traj) != len(limit_traj) or not np.allclose(sys_traj.time_array, limit_traj.time_array,
                                                           rtol=0, atol=1e-12):
        raise InvalidParameter("system and limit trajectories have different snapshot times")
    h = sys_traj.grid.h
    w = limit_traj.array("w")
    du = np.sum(np.abs(sys_traj.array("u") - np.maximum(w, 0.0)), axis=1) * h
    dv = np.sum(np.abs(sys_traj.array("v") - np.maximum(-w, 0.0)), axis=1) * h
    t = sys_traj.time_array
    return LimitDistance(trapezoid_in_time(t, du), trapezoid_in_time(t, dv))


@dataclass
class DiagnosticsReport:
    domain: str
    k: float
    epsilon: float
    bounds_violation: float
    reaction_mass: float
    segregation_norm: float
    reaction_mass_snapshots: float
    segregation_norm_snapshots: float
    l1_u: float
    l1_v_defect: float
    grad_sq: float
    grad_sq_snapshots: float
    translate_fits: dict
    front: dict
    convergence_to_limit: dict | None
    far_field_monitor: float
    conservation_defect: float
    monotonicity_violations: int
    steps: int
    max_picard_iters: int
    extra: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return asdict(self)

    def to_ndjson(self) -> str:
        return json.dumps(_clean(self.to_dict()), sort_keys=True, separators=(",", ":"))

    @classmethod
    def from_dict(cls, data: dict) -> "DiagnosticsReport":
        names = set(cls.__dataclass_fields__)
        missing = names - set(data) - {"extra"}
        if missing:
            raise InvalidParameter(f"report is missing fields {sorted(missing)}")
        return cls(**{k: v for k, v in data.items() if k in names})

    def summary(self) -> str:
        rows = [
            ("bounds_violation", self.bounds_violation),
            ("reaction_mass", self.reaction_mass),
            ("segregation_norm", self.segregation_norm),
            ("l1_u", self.l1_u),
            ("l1_v_defect", self.l1_v_defect),
            ("grad_sq", self.grad_sq),
            ("space exponent u", self.translate_fits.get("space_u")),
            ("time exponent u", self.translate_fits.get("time_u")),
            ("front exponent", self.front.get("exponent")),
            ("front coefficient", self.front.get("coefficient")),
        ]
        if self.convergence_to_limit is not None:
            rows.append(("distance to limit", self.convergence_to_limit["total"]))
        width = max(len(r[0]) for r in rows)
        head = f"{self.domain} k={self.k:g} eps={self.epsilon:g}"
        return "\n".join([head] + [f"  {name:<{width}}  {_fmt(val)}" for name, val in rows])


def _fmt(val):
    if val is None:
        return "-"
    return f"{val:.6g}" if isinstance(val, float) else str(val)


def _clean(obj):
    """Make a report JSON-safe: numpy scalars to Python, non-finite floats to None."""
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, (np.floating, float)):
        x = float(obj)
        return x if math.isfinite(x) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def front_summary(traj: Trajectory) -> dict:
    fit = extract_front(traj)
    return {
        "exponent": fit.exponent,
        "coefficient": fit.coefficient,
        "residual": fit.residual,
        "absent": int(sum(fit.absent)),
    }


def measure(traj: Trajectory, spec: ProblemSpec, limit_traj: Trajectory | None = None) -> DiagnosticsReport:
    """All diagnostics of a solved system trajectory (trapezoid in t over snapshots)."""
    t = traj.time_array
    h = traj.grid.h
    u = traj.array("u")
    v = traj.array("v")
    law = spec.law
    seg_t = np.sum(u * v, axis=1) * h
    seg_snap = trapezoid_in_time(t, seg_t)
    # per-step tallies when the trajectory carries them
    if traj.cumulative_segregation and traj.steps:
        seg = traj.cumulative_segregation[-1]
        mass = traj.cumulative_reaction_mass[-1]
    else:
        seg = seg_snap
        mass = spec.k * seg_snap
    u_inf, v_inf = far_field_targets(spec)
    l1_u = float(np.max(np.sum(np.abs(u - u_inf), axis=1) * h))
    l1_v = float(np.max(np.sum(np.abs(v - v_inf), axis=1) * h))
    left = float(law.potential(spec.U0)) if spec.domain == HALF_LINE else None
    grad_snap = trapezoid_in_time(t, grad_sq_profile(law.potential(u), h, left))
    grad = traj.grad_sq_integral if traj.grad_sq_integral is not None else grad_snap
    fits = translate_fits(traj, spec)
    w_mass = np.sum(u - v, axis=1) * h
    conservation = abs((w_mass[-1] - w_mass[0]) - traj.boundary_flux_integral)
    dist = None
    if limit_traj is not None:
        d = compare_to_limit(traj, limit_traj)
        dist = {"u": d.u, "v": d.v, "total": d.total}
    return DiagnosticsReport(
        domain=spec.domain,
        k=float(spec.k),
        epsilon=float(spec.epsilon),
        bounds_violation=bounds_violation(traj, spec.U0, spec.V0),
        reaction_mass=float(mass),
        segregation_norm=float(seg),
        reaction_mass_snapshots=float(spec.k * seg_snap),
        segregation_norm_snapshots=float(seg_snap),
        l1_u=l1_u,
        l1_v_defect=l1_v,
        grad_sq=float(grad),
        grad_sq_snapshots=float(grad_snap),
        translate_fits={k: v for k, v in asdict(fits).items()},
        front=front_summary(traj),
        convergence_to_limit=dist,
        far_field_monitor=float(traj.far_field_monitor),
        conservation_defect=float(conservation),
        monotonicity_violations=int(traj.monotonicity_violations),
        steps=len(traj.steps),
        max_picard_iters=int(max((s["picard_iters"] for s in traj.steps), default=0)),
    )


# -- comparison principle ----------------------------------------------------------


@dataclass(frozen=True)
class Perturbation:
    """Ordered change of initial data.

    ``raise_u``: u0 += amplitude*U0*bump (capped at U0).  ``lower_v``: v0 set to
    0 on [center - width/2, center + width/2].  ``none``: unchanged.
    """

    kind: str = "none"
    amplitude: float = 0.1
    center: float = 0.5
    width: float = 0.5

    def __post_init__(self):
        if self.kind not in ("none", "raise_u", "lower_v"):
            raise InvalidParameter(f"unknown perturbation {self.kind!r}", field="kind")

    def apply(self, x, u0, v0, U0, V0):
        if self.kind == "raise_u":
            z = (x - self.center) / (0.5 * self.width)
            bump = np.where(np.abs(z) < 1, np.cos(0.5 * np.pi * np.clip(z, -1, 1)) ** 2, 0.0)
            return np.minimum(u0 + self.amplitude * U0 * bump, U0), v0.copy()
        if self.kind == "lower_v":
            inside = np.abs(x - self.center) <= 0.5 * self.width
            return u0.copy(), np.where(inside, 0.0, v0)
        return u0.copy(), v0.copy()


def random_perturbations(rng: np.random.Generator, spec: ProblemSpec, count: int = 5):
    lo = 0.0 if spec.domain == HALF_LINE else -2.0
    out = []
    for i in range(count):
        kind = ("raise_u", "lower_v")[i % 2]
        out.append(Perturbation(kind, float(rng.uniform(0.05, 0.5)), float(rng.uniform(lo + 0.2, 2.0)),
                                float(rng.uniform(0.1, 1.0))))
    return out


@dataclass
class ComparisonVerdict:
    ordered: bool
    worst_u: float
    worst_v: float
    front_upper: list
    front_lower: list

    @property
    def front_advances(self) -> bool:
        pairs = [(a, b) for a, b in zip(self.front_upper, self.front_lower) if a is not None and b is not None]
        return all(a >= b - 1e-9 for a, b in pairs)


def comparison_test(spec: ProblemSpec, perturbation: Perturbation, slack: float = 1e-10,
                    base: Trajectory | None = None) -> ComparisonVerdict:
    """Solve from the base data and the perturbed (upper) data; check the ordering
    upper u >= base u and upper v <= base v at every snapshot.

    ``base`` may pass in an already solved run from the unperturbed data.
    """
    u0, v0 = initial_state(spec)
    x = spec.grid.centers
    up_u, up_v = perturbation.apply(x, u0.values, v0.values, spec.U0, spec.V0)
    if base is None:
        base = solve_system(spec, initial=(u0.values, v0.values))
    upper = solve_system(spec, initial=(up_u, up_v))
    du = upper.array("u") - base.array("u")
    dv = base.array("v") - upper.array("v")
    worst_u = float(max(0.0, -np.min(du)))
    worst_v = float(max(0.0, -np.min(dv)))
    fu = extract_front(upper).positions
    fl = extract_front(base).positions
    return ComparisonVerdict(worst_u <= slack and worst_v <= slack, worst_u, worst_v, fu, fl)


def limit_trajectory_for(spec: ProblemSpec) -> Trajectory:
    return solve_limit(limit_spec_from(spec), dt_first=spec.dt_init)
