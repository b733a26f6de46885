"""Grids, fields, trajectories, run specifications and initial data families."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace

import numpy as np

from .errors import InvalidParameter
from .laws import DiffusionLaw, power_law

HALF_LINE = "half_line"
WHOLE_LINE = "whole_line"
DOMAINS = (HALF_LINE, WHOLE_LINE)


@dataclass(frozen=True)
class Grid1D:
    """Uniform cell-centred grid on (left, right)."""

    cell_count: int
    left: float
    right: float

    @property
    def h(self) -> float:
        return (self.right - self.left) / self.cell_count

    @property
    def centers(self) -> np.ndarray:
        return self.left + self.h * (np.arange(self.cell_count) + 0.5)

    @property
    def faces(self) -> np.ndarray:
        return self.left + self.h * np.arange(self.cell_count + 1)

    def same_as(self, other: "Grid1D") -> bool:
        return (
            self.cell_count == other.cell_count
            and math.isclose(self.left, other.left, abs_tol=1e-12)
            and math.isclose(self.right, other.right, abs_tol=1e-12)
        )


def make_grid(domain: str, R: float, cell_count: int) -> Grid1D:
    if domain not in DOMAINS:
        raise InvalidParameter(f"unknown domain {domain!r}", field="domain")
    if not R > 0:
        raise InvalidParameter(f"truncation radius R must be positive (got {R})", field="R")
    if int(cell_count) != cell_count or cell_count < 2:
        raise InvalidParameter(f"cell_count must be an integer >= 2 (got {cell_count})", field="cells")
    left = 0.0 if domain == HALF_LINE else -float(R)
    return Grid1D(int(cell_count), left, float(R))


@dataclass(frozen=True, eq=False)
class Field:
    grid: Grid1D
    values: np.ndarray
    time: float = 0.0

    def __post_init__(self):
        vals = np.asarray(self.values, dtype=float)
        if vals.shape != (self.grid.cell_count,):
            raise InvalidParameter(
                f"field has {vals.shape} values for a {self.grid.cell_count}-cell grid"
            )
        if not np.all(np.isfinite(vals)):
            raise InvalidParameter("field values must be finite")
        object.__setattr__(self, "values", vals)

    def l1(self) -> float:
        return float(np.sum(np.abs(self.values)) * self.grid.h)

    def to_csv(self, path, name="value") -> None:
        write_csv(path, self.grid.centers, {name: self.values})


def write_csv(path, x, columns: dict) -> None:
    names = ["x", *columns]
    data = np.column_stack([x, *columns.values()])
    np.savetxt(path, data, delimiter=",", header=",".join(names), comments="", fmt="%.17g")


@dataclass
class Trajectory:
    """Snapshots of one or more fields plus tallies accumulated per accepted step.

    ``fields[name]`` has shape (n_snapshots, cell_count).  The cumulative
    arrays are sampled at snapshot times; ``steps`` holds one record per
    accepted step (time, dt, iteration counts, boundary fluxes, ...).
    """

    grid: Grid1D
    times: list = field(default_factory=list)
    fields: dict = field(default_factory=dict)
    cumulative_reaction_mass: list = field(default_factory=list)
    cumulative_segregation: list = field(default_factory=list)
    boundary_flux_log: list = field(default_factory=list)
    steps: list = field(default_factory=list)
    monotonicity_violations: int = 0
    kind: str = "system"
    k: float = 0.0
    boundary_flux_integral: float = 0.0
    far_field_monitor: float = 0.0
    grad_sq_integral: float | None = None

    def add_snapshot(self, t: float, values: dict, reaction_mass=0.0, segregation=0.0):
        if self.times and not t > self.times[-1]:
            raise InvalidParameter(f"snapshot time {t} does not increase past {self.times[-1]}")
        self.times.append(float(t))
        for name, arr in values.items():
            self.fields.setdefault(name, []).append(np.array(arr, dtype=float))
        self.cumulative_reaction_mass.append(float(reaction_mass))
        self.cumulative_segregation.append(float(segregation))

    def array(self, name: str) -> np.ndarray:
        return np.asarray(self.fields[name])

    @property
    def time_array(self) -> np.ndarray:
        return np.asarray(self.times)

    def snapshot(self, name: str, i: int) -> Field:
        return Field(self.grid, self.fields[name][i], self.times[i])

    def __len__(self):
        return len(self.times)


@dataclass(frozen=True)
class SolverTolerances:
    picard_tol: float = 1e-10
    newton_tol: float = 1e-12
    max_inner_iters: int = 50
    max_picard: int = 200


@dataclass(frozen=True)
class DtControl:
    dt_init: float | None = None  # None -> min(h**2, dt_max)
    dt_max: float = 1e-3
    dt_min: float = 1e-12
    growth: float = 1.5
    shrink: float = 0.5

    def __post_init__(self):
        if not 1.0 <= self.growth <= 1.5:
            raise InvalidParameter(f"dt growth factor must lie in [1, 1.5] (got {self.growth})", field="growth")
        if not 0.0 < self.shrink < 1.0:
            raise InvalidParameter(f"dt shrink factor must lie in (0, 1) (got {self.shrink})", field="shrink")
        if not self.dt_max > 0:
            raise InvalidParameter(f"dt_max must be positive (got {self.dt_max})", field="dt_max")
        if self.dt_init is not None and not self.dt_init > 0:
            raise InvalidParameter(f"dt_init must be positive (got {self.dt_init})", field="dt_init")


def default_radius(law: DiffusionLaw, U0: float, V0: float, T: float) -> float:
    return 4.0 * math.sqrt(law.deriv(max(U0, V0)) * T) + 4.0


def minimum_radius(law: DiffusionLaw, U0: float, V0: float, T: float) -> float:
    return 4.0 * max(1.0, math.sqrt(law.deriv(max(U0, V0)) * T))


@dataclass(frozen=True)
class ProblemSpec:
    """Full description of one finite-k run (and its limit problem).

    ``R=None`` selects the default truncation radius; ``resolution`` is cells
    per unit length and is ignored when ``cells`` is given.
    """

    domain: str = HALF_LINE
    R: float | None = None
    epsilon: float = 0.0
    k: float = 10.0
    U0: float = 1.0
    V0: float = 1.0
    T: float = 0.5
    law: DiffusionLaw = field(default_factory=power_law)
    init_sharpness: float = 0.5
    sharpness_exponent: float = 0.5
    resolution: float = 200.0
    cells: int | None = None
    tolerances: SolverTolerances = field(default_factory=SolverTolerances)
    dt_control: DtControl = field(default_factory=DtControl)
    snapshot_count: int = 50

    def __post_init__(self):
        if self.domain not in DOMAINS:
            raise InvalidParameter(f"domain must be one of {DOMAINS} (got {self.domain!r})", field="domain")
        for name in ("U0", "V0", "T"):
            if not getattr(self, name) > 0:
                raise InvalidParameter(f"{name} must be positive (got {getattr(self, name)})", field=name)
        if not self.epsilon >= 0:
            raise InvalidParameter(f"epsilon must be >= 0 (got {self.epsilon})", field="epsilon")
        if not self.k >= 0:
            raise InvalidParameter(f"k must be >= 0 (got {self.k})", field="k")
        if not self.init_sharpness > 0:
            raise InvalidParameter("init_sharpness must be positive", field="init_sharpness")
        if self.R is not None:
            if not self.R > 0:
                raise InvalidParameter(f"truncation radius R must be positive (got {self.R})", field="R")
            rmin = minimum_radius(self.law, self.U0, self.V0, self.T)
            if self.R < rmin - 1e-12:
                raise InvalidParameter(
                    f"R={self.R} is too small: fronts can reach the artificial boundary (need R >= {rmin:.4g})",
                    field="R",
                )
        if self.cell_count < 16:
            raise InvalidParameter(f"grid needs at least 16 cells (got {self.cell_count})", field="cells")
        if self.snapshot_count < 1:
            raise InvalidParameter("snapshot_count must be >= 1", field="snapshot_count")

    @property
    def radius(self) -> float:
        if self.R is not None:
            return float(self.R)
        return default_radius(self.law, self.U0, self.V0, self.T)

    @property
    def length(self) -> float:
        return self.radius * (1.0 if self.domain == HALF_LINE else 2.0)

    @property
    def cell_count(self) -> int:
        if self.cells is not None:
            return int(self.cells)
        return int(round(self.length * self.resolution))

    @property
    def grid(self) -> Grid1D:
        return make_grid(self.domain, self.radius, self.cell_count)

    @property
    def dt_init(self) -> float:
        dt = self.dt_control.dt_init
        if dt is None:
            dt = min(self.grid.h ** 2, self.dt_control.dt_max)
        if self.k > 0:
            dt = min(dt, 10.0 / self.k)
        return dt

    def snapshot_times(self) -> np.ndarray:
        return self.T * np.arange(1, self.snapshot_count + 1) / self.snapshot_count

    def with_(self, **changes) -> "ProblemSpec":
        return replace(self, **changes)


# -- initial data ----------------------------------------------------------------


def smoothstep(z):
    """C^2 monotone step 0 -> 1 on [0, 1]; the integral of the bump 30 z^2 (1-z)^2."""
    z = np.clip(np.asarray(z, dtype=float), 0.0, 1.0)
    return z ** 3 * (10.0 - 15.0 * z + 6.0 * z ** 2)


def step_profile(x, domain: str, width: float):
    """sigma(x/width): exactly 1 to the left of the transition, exactly 0 to the right.

    Half-line: transition on [0, width] with sigma(0) = 1.
    Whole-line: transition on [-width, width].
    """
    x = np.asarray(x, dtype=float)
    if domain == HALF_LINE:
        return 1.0 - smoothstep(x / width)
    return 1.0 - smoothstep(0.5 * (x / width + 1.0))


def sharpness(spec: ProblemSpec, k: float | None = None) -> float:
    k = spec.k if k is None else k
    return spec.init_sharpness * max(k, 1.0) ** (-spec.sharpness_exponent)


def initial_profiles(x, spec: ProblemSpec, k: float | None = None):
    s = step_profile(x, spec.domain, sharpness(spec, k))
    return spec.U0 * s, spec.V0 * (1.0 - s)


def limit_initial_data(x, spec: ProblemSpec):
    """The step targets u0_inf, v0_inf evaluated away from the jump."""
    x = np.asarray(x, dtype=float)
    if spec.domain == HALF_LINE:
        u = np.where(x <= 0.0, spec.U0, 0.0)
        v = np.where(x <= 0.0, 0.0, spec.V0)
    else:
        u = np.where(x < 0.0, spec.U0, 0.0)
        v = np.where(x < 0.0, 0.0, spec.V0)
    return u, v


def build_initial_data(spec: ProblemSpec, k: float | None = None):
    grid = spec.grid
    u, v = initial_profiles(grid.centers, spec, k)
    return Field(grid, u, 0.0), Field(grid, v, 0.0)


def cutoff(x, R: float):
    """beta^R: 1 for x <= R-1, 0 for x >= R, smooth in between."""
    x = np.asarray(x, dtype=float)
    return 1.0 - smoothstep(x - (R - 1.0))


def whole_line_cutoff(x, R: float):
    """psi_hat^R: 1 for |x| <= R, decaying to 0 at |x| = R+1."""
    x = np.asarray(x, dtype=float)
    return 1.0 - smoothstep(np.abs(x) - R)


def truncate_initial_data(u0: Field, v0: Field, R: float, V0: float, U0: float | None = None):
    """Apply the cut-off to initial data on the truncated domain.

    Half-line: u0*beta^R and V0 - (V0 - v0)*beta^R.  Whole-line grids (left < 0)
    use psi_hat^R, which equals 1 on (-R, R); the identity is kept explicit.
    """
    if not R > 2:
        raise InvalidParameter(f"truncation needs R > 2 (got {R})", field="R")
    x = u0.grid.centers
    if u0.grid.left < 0:
        if U0 is None:
            U0 = float(np.max(u0.values))
        psi = whole_line_cutoff(x, R)
        neg = x < 0
        u = np.where(neg, U0 - (U0 - u0.values) * psi, u0.values * psi)
        v = np.where(neg, v0.values * psi, V0 - (V0 - v0.values) * psi)
    else:
        beta = cutoff(x, R)
        u = u0.values * beta
        v = V0 - (V0 - v0.values) * beta
    return Field(u0.grid, u, u0.time), Field(v0.grid, v, v0.time)
