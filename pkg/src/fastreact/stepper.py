"""Backward-Euler finite-volume step for c_t = (phi(c))_xx - a(x) c.

The building block shared by the coupled system and the limit problem.  A
"potential" is any object with vectorized ``potential(s)`` and ``slope(s)``
defined on all of R (DiffusionLaw, LimitFlux).
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np

from . import _kernels
from .errors import InvalidParameter, StepFailure
from .problem import DtControl, Field, Trajectory

log = logging.getLogger(__name__)

SNAP_THRESHOLD = 1e-14


@dataclass(frozen=True)
class Side:
    kind: str = "neumann"
    value: float = 0.0

    def __post_init__(self):
        if self.kind not in ("neumann", "dirichlet"):
            raise InvalidParameter(f"unknown boundary kind {self.kind!r}")


NEUMANN = Side("neumann")


def dirichlet(value: float) -> Side:
    return Side("dirichlet", float(value))


@dataclass(frozen=True)
class BoundaryCondition:
    left: Side = NEUMANN
    right: Side = NEUMANN

    def encode(self, pot, coef):
        kl = 1 if self.left.kind == "dirichlet" else 0
        kr = 1 if self.right.kind == "dirichlet" else 0
        pl = coef * float(pot.potential(self.left.value)) if kl else 0.0
        pr = coef * float(pot.potential(self.right.value)) if kr else 0.0
        return kl, pl, kr, pr


@dataclass
class StepReport:
    newton_iters: int
    residual: float
    flux_left: float
    flux_right: float
    method: str = "newton"
    residual_history: list = field(default_factory=list)


class _Regularized:
    """potential + (s - anchor)/n, the uniformly parabolic companion of a law."""

    def __init__(self, pot, n, anchor):
        self.pot = pot
        self.n = float(n)
        self.anchor = anchor

    def potential(self, s):
        return self.pot.potential(s) + (np.asarray(s, dtype=float) - self.anchor) / self.n

    def slope(self, s):
        return self.pot.slope(s) + 1.0 / self.n


class _Problem:
    """One implicit step's data, with residual evaluation."""

    def __init__(self, c_old, pot, coef, dt, h, bc, a):
        self.c_old = c_old
        self.pot = pot
        self.coef = coef
        self.dt = dt
        self.h = h
        self.a = a
        self.kl, self.pl, self.kr, self.pr = bc.encode(pot, coef)

    def residual(self, c):
        P = self.coef * self.pot.potential(c)
        return _kernels.residual(c, self.c_old, P, self.a, self.dt, self.h, self.kl, self.pl, self.kr, self.pr)

    def correction(self, S, g):
        return _kernels.solve_linearized(S, self.a, g, self.dt, self.h, self.kl, self.kr)


def _newton(prob, c, tol, max_iters, min_damping=1.0 / 1024):
    g, ql, qr = prob.residual(c)
    rn = float(np.max(np.abs(g)))
    hist = [rn]
    for it in range(max_iters + 1):
        if rn <= tol:
            return c, it, rn, ql, qr, hist, True
        if it == max_iters or not np.isfinite(rn):
            break
        S = prob.coef * prob.pot.slope(c)
        d = prob.correction(S, g)
        lam = 1.0
        while True:
            ct = c - lam * d
            gt, qlt, qrt = prob.residual(ct)
            rt = float(np.max(np.abs(gt)))
            if rt < rn:
                break
            lam *= 0.5
            if lam < min_damping:
                return c, it, rn, ql, qr, hist, False
        c, g, ql, qr, rn = ct, gt, qlt, qrt, rt
        hist.append(rn)
    return c, max_iters, rn, ql, qr, hist, False


def _picard(prob, c, tol, max_iters, lo, hi):
    """Fixed-slope (L-scheme) iteration: linearize with the constant slope L >= sup phi'."""
    probe = np.linspace(lo, hi, 65)
    L = float(np.max(prob.coef * prob.pot.slope(probe)))
    S = np.full_like(c, L)
    g, ql, qr = prob.residual(c)
    rn = float(np.max(np.abs(g)))
    hist = [rn]
    for it in range(max_iters + 1):
        if rn <= tol:
            return c, it, rn, ql, qr, hist, True
        if it == max_iters or not np.isfinite(rn):
            break
        c = c - prob.correction(S, g)
        g, ql, qr = prob.residual(c)
        rn = float(np.max(np.abs(g)))
        hist.append(rn)
    return c, max_iters, rn, ql, qr, hist, False


def solve_step(c_old, pot, dt, h, bc, absorption=None, tol=1e-12, max_iters=50,
               diffusivity=1.0, guess=None):
    """Array-level implicit step; returns (c_new, StepReport) or raises StepFailure."""
    if not dt > 0:
        raise InvalidParameter(f"time step must be positive (got {dt})", field="dt")
    c_old = np.asarray(c_old, dtype=float)
    a = np.zeros_like(c_old) if absorption is None else np.asarray(absorption, dtype=float)
    if a.shape != c_old.shape:
        a = np.broadcast_to(a, c_old.shape).astype(float)
    if np.any(a < 0):
        raise InvalidParameter("absorption must be nonnegative")
    prob = _Problem(c_old, pot, float(diffusivity), float(dt), float(h), bc, a)

    starts = [c_old.copy()] if guess is None else [np.array(guess, dtype=float), c_old.copy()]
    if len(starts) == 1:
        starts.append(c_old.copy())
    total = 0
    for attempt, start in enumerate(starts):
        # second attempt backtracks harder before giving up
        damping = 1.0 / 1024 if attempt == 0 else 1.0 / 2 ** 20
        c, it, rn, ql, qr, hist, ok = _newton(prob, start, tol, max_iters, damping)
        total += it
        if ok:
            return _finish(c, it if attempt == 0 else total, rn, ql, qr, hist, "newton")

    # both Newton attempts failed: monotone iteration on the regularized law
    bvals = [v.value for v in (bc.left, bc.right) if v.kind == "dirichlet"]
    lo = float(min(np.min(c_old), *bvals)) if bvals else float(np.min(c_old))
    hi = float(max(np.max(c_old), *bvals)) if bvals else float(np.max(c_old))
    anchor = hi if hi > 0 else 1.0
    reg = _Regularized(pot, 1.0 / tol, anchor)
    rprob = _Problem(c_old, reg, float(diffusivity), float(dt), float(h), bc, a)
    c, it, rn, ql, qr, hist, ok = _picard(rprob, c_old.copy(), tol, 40 * max_iters, lo, hi)
    total += it
    if ok:
        log.debug("Newton failed twice; regularized Picard converged in %d sweeps", it)
        return _finish(c, total, rn, ql, qr, hist, "picard")
    raise StepFailure(f"implicit step did not converge (residual {rn:.3e})", residual=rn)


def _finish(c, iters, rn, ql, qr, hist, method):
    c = np.where(np.abs(c) < SNAP_THRESHOLD, 0.0, c)
    return c, StepReport(iters, rn, float(ql), float(qr), method, hist)


def implicit_step(c: Field, law, dt, bc: BoundaryCondition, absorption=None, tol=1e-12,
                  max_iters=50, diffusivity=1.0):
    """One backward-Euler step of c_t = diffusivity * (law(c))_xx - absorption * c."""
    a = None if absorption is None else getattr(absorption, "values", absorption)
    vals, report = solve_step(c.values, law, dt, c.grid.h, bc, a, tol, max_iters, diffusivity)
    return Field(c.grid, vals, c.time + dt), report


# -- time marching -----------------------------------------------------------------


def march(state, t0, t_end, stops, dtc: DtControl, dt_first, step, accept):
    """Advance ``state`` from t0 to t_end, landing exactly on every stop.

    ``step(state, t, dt)`` returns ``(new_state, info)`` or raises StepFailure;
    ``accept(new_state, info, t_new, dt, at_stop)`` runs after each accepted step.
    The dt sequence depends only on dt_first, dtc and the stops, so runs with
    the same settings share time levels unless one of them has to cut dt.
    """
    if not t_end > t0:
        raise InvalidParameter(f"target time {t_end} must exceed start time {t0}")
    stops = sorted({float(s) for s in stops if t0 < s < t_end} | {float(t_end)})
    t = t0
    dt = float(dt_first)
    idx = 0
    while idx < len(stops):
        target = stops[idx]
        remaining = target - t
        land = remaining <= dt * (1.0 + 1e-3)
        dt_eff = remaining if land else dt
        try:
            new, info = step(state, t, dt_eff)
        except StepFailure as exc:
            dt = dt_eff * dtc.shrink
            log.debug("step failed at t=%.6g (%s); retrying with dt=%.3g", t, exc, dt)
            if dt < dtc.dt_min:
                raise StepFailure(f"dt underflow at t={t:.6g}: {exc}", residual=exc.residual) from exc
            continue
        t = target if land else t + dt_eff
        accept(new, info, t, dt_eff, land)
        state = new
        if land:
            idx += 1
        else:
            dt = min(dt * dtc.growth, dtc.dt_max)
    return state


def adaptive_advance(c: Field, law, t_target, bc: BoundaryCondition, absorption_provider=None,
                     dt_control: DtControl | None = None, snapshot_times=(), tol=1e-12,
                     max_iters=50, diffusivity=1.0, every_step=False) -> Trajectory:
    """March a scalar equation to ``t_target`` and return the snapshot trajectory.

    ``absorption_provider(t, c)`` supplies the absorption field for the step
    ending at t (None means zero absorption).
    """
    dtc = dt_control or DtControl()
    grid = c.grid
    traj = Trajectory(grid, kind="scalar")
    traj.add_snapshot(c.time, {"c": c.values})
    dt_first = dtc.dt_init if dtc.dt_init is not None else min(grid.h ** 2, dtc.dt_max)

    def step(vals, t, dt):
        a = None if absorption_provider is None else absorption_provider(t + dt, vals)
        return solve_step(vals, law, dt, grid.h, bc, a, tol, max_iters, diffusivity)

    def accept(vals, rep, t, dt, at_stop):
        traj.steps.append({"t": t, "dt": dt, "iters": rep.newton_iters, "method": rep.method,
                           "residual": rep.residual})
        traj.boundary_flux_log.append({"t": t, "dt": dt, "left": rep.flux_left, "right": rep.flux_right})
        if every_step or at_stop:
            traj.add_snapshot(t, {"c": vals})

    march(c.values, c.time, t_target, snapshot_times, dtc, dt_first, step, accept)
    return traj
