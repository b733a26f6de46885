"""Single runs, sweeps and report verification, with their on-disk artifacts.

Layout of one run directory (named by a content hash of its settings):

    snapshots/system_0000.csv ...   x,u,v per snapshot
    snapshots/limit_0000.csv ...    x,w,u,v per snapshot
    run.ndjson                      one record per accepted step
    report.ndjson                   the diagnostics record
    front.ndjson                    front positions plus the fit summary
    plots.script                    gnuplot script reading only the CSVs
    FAILED                          present when a solve failed
"""

from __future__ import annotations

import hashlib
import json
import logging
from concurrent.futures import ProcessPoolExecutor
from dataclasses import asdict, dataclass, field, fields, is_dataclass
from pathlib import Path

import numpy as np

from .config import SweepPlan, load_run_config
from .diagnostics import DiagnosticsReport, _clean, measure
from .errors import ConfigError, InvalidParameter, StepFailure
from .laws import law_to_text
from .limit import extract_front, limit_spec_from, solve_limit
from .problem import ProblemSpec, Trajectory, write_csv
from .system import solve_system

log = logging.getLogger(__name__)

EXIT_OK, EXIT_INVALID, EXIT_SOLVER, EXIT_ACCEPTANCE = 0, 1, 2, 3

BOUNDS_TOL = 1e-10
FAR_FIELD_TOL = 1e-8
CONSERVATION_TOL = 1e-8
MASS_SPREAD = 1.5
SEGREGATION_DROP = 0.02
BAND = 2.0
LIMIT_RATIO = 0.25
REFINEMENT_CHANGE = 0.2


def spec_fingerprint(spec: ProblemSpec) -> str:
    """Content hash of every field of a spec (laws by their definition)."""

    def norm(obj):
        if is_dataclass(obj) and hasattr(obj, "kind") and hasattr(obj, "table_s"):
            out = {"law": law_to_text(obj), "n": obj.regularization_n, "anchor": obj.anchor_value}
            if obj.table_s is not None:
                out["table"] = hashlib.sha256(np.asarray([obj.table_s, obj.table_phi]).tobytes()).hexdigest()
            return out
        if is_dataclass(obj):
            return {f.name: norm(getattr(obj, f.name)) for f in fields(obj)}
        return obj

    text = json.dumps(norm(spec), sort_keys=True, default=repr)
    return hashlib.sha256(text.encode()).hexdigest()[:12]


def _dump_ndjson(path: Path, records) -> None:
    with open(path, "w") as fh:
        for rec in records:
            fh.write(json.dumps(_clean(rec), sort_keys=True, separators=(",", ":")) + "\n")


def write_snapshots(traj: Trajectory, directory: Path, prefix: str, names) -> list:
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    x = traj.grid.centers
    for i in range(len(traj)):
        p = directory / f"{prefix}_{i:04d}.csv"
        write_csv(p, x, {n: traj.fields[n][i] for n in names})
        paths.append(p)
    (directory / f"{prefix}_times.csv").write_text(
        "index,t\n" + "".join(f"{i},{t!r}\n" for i, t in enumerate(traj.times))
    )
    return paths


def plot_script(n_system: int, n_limit: int, front: bool) -> str:
    lines = [
        "# gnuplot script; run from the run directory: gnuplot plots.script",
        "set datafile separator ','",
        "set terminal pngcairo size 900,600",
        "set key autotitle columnhead",
    ]
    if n_system:
        last = n_system - 1
        lines += [
            "set output 'profiles_system.png'",
            "set xlabel 'x'; set ylabel 'concentration'",
            f"plot for [i=0:{last}:{max(1, last // 5)}] sprintf('snapshots/system_%04d.csv', i) "
            "using 1:2 with lines lc rgb 'blue' notitle, "
            f"for [i=0:{last}:{max(1, last // 5)}] sprintf('snapshots/system_%04d.csv', i) "
            "using 1:3 with lines lc rgb 'red' notitle",
        ]
    if n_limit:
        last = n_limit - 1
        lines += [
            "set output 'profiles_limit.png'",
            "set xlabel 'x'; set ylabel 'w'",
            f"plot for [i=0:{last}:{max(1, last // 5)}] sprintf('snapshots/limit_%04d.csv', i) "
            "using 1:2 with lines notitle",
        ]
    if front:
        lines += [
            "set output 'front.png'",
            "set logscale xy; set xlabel 't'; set ylabel 'front position'",
            "plot 'front.csv' using 1:(abs($2)) with points pt 7 title 'front'",
            "unset logscale",
        ]
    return "\n".join(lines) + "\n"


@dataclass
class RunResult:
    status: int
    run_dir: Path | None
    report: dict | None = None
    message: str = ""


def execute(spec: ProblemSpec, run_dir: Path, solve: str = "both", limit_traj: Trajectory | None = None) -> RunResult:
    """Solve per ``solve`` and write every artifact into ``run_dir``."""
    run_dir.mkdir(parents=True, exist_ok=True)
    failed = run_dir / "FAILED"
    if failed.exists():
        failed.unlink()
    snaps = run_dir / "snapshots"
    sys_traj = None
    try:
        if solve in ("limit", "both") and limit_traj is None:
            limit_traj = solve_limit(limit_spec_from(spec), dt_first=spec.dt_init)
        if limit_traj is not None and solve in ("limit", "both"):
            write_snapshots(limit_traj, snaps, "limit", ("w", "u", "v"))
        if solve in ("system", "both"):
            sys_traj = solve_system(spec)
            write_snapshots(sys_traj, snaps, "system", ("u", "v"))
            _dump_ndjson(run_dir / "run.ndjson", sys_traj.steps)
        elif limit_traj is not None:
            _dump_ndjson(run_dir / "run.ndjson", limit_traj.steps)
    except StepFailure as exc:
        failed.write_text(f"solver failure: {exc}\n")
        return RunResult(EXIT_SOLVER, run_dir, None, str(exc))

    front_src = limit_traj if limit_traj is not None else sys_traj
    fit = extract_front(front_src)
    recs = fit.records() + [{"fit": {"exponent": fit.exponent, "coefficient": fit.coefficient,
                                     "residual": fit.residual}}]
    _dump_ndjson(run_dir / "front.ndjson", recs)
    with open(run_dir / "front.csv", "w") as fh:
        fh.write("t,position\n")
        for t, p in zip(fit.times, fit.positions):
            if p is not None:
                fh.write(f"{t!r},{p!r}\n")

    if sys_traj is not None:
        report = measure(sys_traj, spec, limit_traj if solve == "both" else None)
        report.extra["fingerprint"] = spec_fingerprint(spec)
        text = report.to_ndjson()
        report_dict = json.loads(text)
    else:
        w = limit_traj.array("w")
        report_dict = _clean({
            "kind": "limit", "domain": spec.domain, "epsilon": spec.epsilon,
            "w_min": float(w.min()), "w_max": float(w.max()),
            "front": {"exponent": fit.exponent, "coefficient": fit.coefficient, "residual": fit.residual},
            "extra": {"fingerprint": spec_fingerprint(spec)},
        })
        text = json.dumps(report_dict, sort_keys=True, separators=(",", ":"))
    (run_dir / "report.ndjson").write_text(text + "\n")
    n_sys = len(sys_traj) if sys_traj is not None else 0
    n_lim = len(limit_traj) if (limit_traj is not None and solve != "system") else 0
    (run_dir / "plots.script").write_text(plot_script(n_sys, n_lim, True))
    return RunResult(EXIT_OK, run_dir, report_dict)


def run_single(config_path, out_dir="runs", snapshot_count=None) -> RunResult:
    """Load a config, solve, and write the run directory under ``out_dir``."""
    try:
        cfg = load_run_config(config_path)
        spec = cfg.spec
        if snapshot_count is not None:
            spec = spec.with_(snapshot_count=int(snapshot_count))
    except (ConfigError, InvalidParameter) as exc:
        return RunResult(EXIT_INVALID, None, None, str(exc))
    digest = cfg.digest if snapshot_count is None else spec_fingerprint(spec)
    run_dir = Path(out_dir) / f"run-{digest}"
    return execute(spec, run_dir, cfg.solve)


# -- sweeps ------------------------------------------------------------------------


def _sweep_child(args):
    spec, run_dir, limit_traj = args
    try:
        res = execute(spec, Path(run_dir), "both", limit_traj)
    except Exception as exc:  # crash isolation: one bad run must not sink its siblings
        Path(run_dir).mkdir(parents=True, exist_ok=True)
        (Path(run_dir) / "FAILED").write_text(f"{type(exc).__name__}: {exc}\n")
        return {"status": EXIT_SOLVER, "run_dir": str(run_dir), "report": None, "message": str(exc)}
    return {"status": res.status, "run_dir": str(res.run_dir), "report": res.report, "message": res.message}


def _limit_child(spec):
    return solve_limit(limit_spec_from(spec), dt_first=spec.dt_init)


@dataclass
class SweepReport:
    rows: list
    properties: list = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(p["passed"] for p in self.properties)

    def table(self) -> str:
        head = f"{'eps':>5} {'res':>6} {'k':>8} {'status':>6} {'mass':>9} {'segregation':>12} {'dist':>10} {'bounds':>9}"
        out = [head]
        for r in self.rows:
            rep = r.get("report") or {}
            dist = (rep.get("convergence_to_limit") or {}).get("total")
            out.append(
                f"{r['epsilon']:>5g} {r['resolution']:>6g} {r['k']:>8g} {r['status']:>6} "
                f"{_num(rep.get('reaction_mass')):>9} {_num(rep.get('segregation_norm')):>12} "
                f"{_num(dist):>10} {_num(rep.get('bounds_violation')):>9}"
            )
        return "\n".join(out)

    def to_json(self) -> str:
        return json.dumps(_clean(asdict(self)), sort_keys=True, indent=1)


def _num(x):
    return "-" if x is None else f"{x:.4g}"


def _spread(vals):
    vals = [v for v in vals if v is not None]
    if len(vals) < 2 or min(vals) <= 0:
        return float("nan")
    return max(vals) / min(vals)


def sweep_properties(rows) -> list:
    """Sweep-level checks per (epsilon, resolution) group and per refinement."""
    props = []

    def add(name, passed, detail):
        props.append({"name": name, "passed": bool(passed), "detail": detail})

    ok_rows = [r for r in rows if r["status"] == EXIT_OK and r["report"]]
    add("all runs completed", len(ok_rows) == len(rows), f"{len(ok_rows)}/{len(rows)} completed")
    add("bounds", all(r["report"]["bounds_violation"] <= BOUNDS_TOL for r in ok_rows),
        f"max violation {max((r['report']['bounds_violation'] for r in ok_rows), default=0):.3e}")
    add("monotone inner iteration", all(r["report"]["monotonicity_violations"] == 0 for r in ok_rows),
        f"violations {sum(r['report']['monotonicity_violations'] for r in ok_rows)}")
    groups = {}
    for r in ok_rows:
        groups.setdefault((r["epsilon"], r["resolution"]), []).append(r)
    for (eps, res), grp in sorted(groups.items()):
        grp = sorted(grp, key=lambda r: r["k"])
        if len(grp) < 2:
            continue
        tag = f"eps={eps:g} res={res:g}"
        ks = [r["k"] for r in grp]
        mass = [r["report"]["reaction_mass"] for r in grp]
        seg = [r["report"]["segregation_norm"] for r in grp]
        kseg = [k * s for k, s in zip(ks, seg)]
        dist = [r["report"]["convergence_to_limit"]["total"] for r in grp]
        add(f"reaction mass spread {tag}", _spread(mass) <= MASS_SPREAD, f"max/min {_spread(mass):.3f}")
        add(f"segregation nonincreasing {tag}", all(b <= a for a, b in zip(seg, seg[1:])),
            "values " + ", ".join(f"{s:.3e}" for s in seg))
        add(f"k*segregation band {tag}", _spread(kseg) <= BAND, f"max/min {_spread(kseg):.3f}")
        if ks[-1] / ks[0] >= 1000:
            add(f"segregation drop {tag}", seg[-1] <= SEGREGATION_DROP * seg[0], f"ratio {seg[-1] / seg[0]:.3e}")
        add(f"distance to limit decreasing {tag}", all(b < a for a, b in zip(dist, dist[1:])),
            "values " + ", ".join(f"{d:.4g}" for d in dist))
        add(f"distance to limit ratio {tag}", dist[-1] <= LIMIT_RATIO * dist[0], f"ratio {dist[-1] / dist[0]:.3f}")
    by_k = {}
    for r in ok_rows:
        by_k.setdefault((r["epsilon"], r["k"]), []).append(r)
    for (eps, k), grp in sorted(by_k.items()):
        grp = sorted(grp, key=lambda r: r["resolution"])
        if len(grp) < 2:
            continue
        d = [r["report"]["convergence_to_limit"]["total"] for r in grp]
        changes = [abs(b - a) / a for a, b in zip(d, d[1:])]
        add(f"refinement eps={eps:g} k={k:g}", all(c <= REFINEMENT_CHANGE for c in changes),
            "relative changes " + ", ".join(f"{c:.3f}" for c in changes))
    return props


def run_sweep(plan: SweepPlan, out_dir="sweeps", workers=None) -> SweepReport:
    workers = workers or plan.parallel_workers
    root = Path(out_dir) / f"sweep-{plan.digest or 'adhoc'}"
    root.mkdir(parents=True, exist_ok=True)
    groups = [(eps, res) for eps in plan.epsilon_values for res in plan.grid_refinements]
    specs = {}
    for eps, res in groups:
        for k in plan.k_values:
            specs[(eps, res, k)] = plan.base.with_(epsilon=eps, resolution=res, k=k, cells=None)
    limit_specs = [plan.base.with_(epsilon=eps, resolution=res, cells=None) for eps, res in groups]

    def pool_map(fn, items):
        if workers == 1:
            return [fn(it) for it in items]
        with ProcessPoolExecutor(max_workers=workers) as ex:
            return list(ex.map(fn, items))

    limits = {}
    for (eps, res), traj in zip(groups, _safe_limits(limit_specs)):
        limits[(eps, res)] = traj
    tasks, keys = [], []
    for key, spec in specs.items():
        eps, res, k = key
        if limits[(eps, res)] is None:
            continue
        tasks.append((spec, str(root / f"run-{spec_fingerprint(spec)}"), limits[(eps, res)]))
        keys.append(key)
    results = dict(zip(keys, pool_map(_sweep_child, tasks)))
    rows = []
    for key in specs:
        eps, res, k = key
        r = results.get(key) or {"status": EXIT_SOLVER, "run_dir": None, "report": None,
                                 "message": "limit problem failed"}
        rows.append({"epsilon": eps, "resolution": res, "k": k, **r})
    report = SweepReport(rows, sweep_properties(rows))
    index = {f"eps={r['epsilon']:g},res={r['resolution']:g},k={r['k']:g}": r["run_dir"] for r in rows}
    (root / "index.json").write_text(json.dumps(index, indent=1, sort_keys=True) + "\n")
    (root / "sweep_report.json").write_text(report.to_json() + "\n")
    return report


def _safe_limits(specs):
    def one(spec):
        try:
            return _limit_child(spec)
        except StepFailure as exc:
            log.error("limit problem failed: %s", exc)
            return None
    # limit solves are cheap and shared by many runs; keep them in-process
    return [one(s) for s in specs]


# -- verification of stored reports ----------------------------------------------


def _load_reports(paths):
    runs, sweeps = [], []
    if not paths:
        raise InvalidParameter("verify needs at least one report path")
    for p in map(Path, paths):
        if p.is_dir():
            cand = [p / "sweep_report.json", p / "report.ndjson"]
            found = [c for c in cand if c.exists()]
            if not found:
                raise InvalidParameter(f"no report found in {p}")
            p = found[0]
        try:
            text = p.read_text()
        except OSError as exc:
            raise InvalidParameter(f"cannot read report {p}: {exc.strerror}") from None
        try:
            if p.name.endswith(".json") and not p.name.endswith(".ndjson"):
                data = json.loads(text)
                if "rows" not in data:
                    raise ValueError("no rows")
                sweeps.append((p, data))
            else:
                for line in filter(None, text.splitlines()):
                    runs.append((p, json.loads(line)))
        except (ValueError, json.JSONDecodeError) as exc:
            raise InvalidParameter(f"corrupt report {p}: {exc}") from None
    return runs, sweeps


def verify(report_paths) -> tuple[list, int]:
    """Re-evaluate thresholds on stored reports; returns (verdict lines, exit code)."""
    runs, sweeps = _load_reports(report_paths)
    reports = [rep for _, rep in runs if rep.get("kind") != "limit"]
    rows = []
    for _, data in sweeps:
        for r in data["rows"]:
            if r.get("report"):
                reports.append(r["report"])
            rows.append(r)
    lines = []
    ok_all = True

    def verdict(name, passed, detail):
        nonlocal ok_all
        ok_all &= bool(passed)
        lines.append(f"{'PASS' if passed else 'FAIL'} {name}: {detail}")

    for rep in reports:
        for key in ("bounds_violation", "monotonicity_violations", "far_field_monitor"):
            if key not in rep:
                raise InvalidParameter(f"report is missing {key!r}")
    if reports:
        bv = max(r["bounds_violation"] for r in reports)
        verdict("bounds", bv <= BOUNDS_TOL, f"max violation {bv:.3e} over {len(reports)} runs")
        mv = sum(r["monotonicity_violations"] for r in reports)
        verdict("monotone inner iteration", mv == 0, f"{mv} violating steps")
        ff = max(r["far_field_monitor"] for r in reports)
        verdict("truncation flux", ff <= FAR_FIELD_TOL, f"max boundary flux {ff:.3e}")
        cons = [r["conservation_defect"] for r in reports if r.get("conservation_defect") is not None]
        if cons:
            verdict("conservation of u - v", max(cons) <= CONSERVATION_TOL, f"max defect {max(cons):.3e}")
    if rows:
        for prop in sweep_properties(rows):
            verdict(prop["name"], prop["passed"], prop["detail"])
    if not lines:
        raise InvalidParameter("no system reports to verify")
    return lines, EXIT_OK if ok_all else EXIT_ACCEPTANCE
