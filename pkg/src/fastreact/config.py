"""Run and sweep configuration files.

INI-style text read with configparser.  Sections and keys (defaults in
brackets):

[problem]  domain [half_line], R [auto], epsilon [0], k [10], U0 [1], V0 [1],
           T [0.5], law [power:m=2.0], init_sharpness [0.5], sharpness_exponent [0.5]
[grid]     resolution [200] (cells per unit length), cells [auto]
[solver]   picard_tol [1e-10], newton_tol [1e-12], max_inner_iters [50],
           max_picard [200], dt_init [auto], dt_max [1e-3], dt_min [1e-12],
           growth [1.5], shrink [0.5]
[output]   snapshot_count [50]
[run]      solve [both] (system, limit or both)
[sweep]    k_values, epsilon_values [problem epsilon], grid_refinements
           [grid resolution], workers [1]

Unknown sections or keys are errors, reported with their line number.
"""

from __future__ import annotations

import configparser
import hashlib
import json
import re
from dataclasses import dataclass, field
from pathlib import Path

from .errors import ConfigError, InvalidParameter
from .laws import parse_law
from .problem import DtControl, ProblemSpec, SolverTolerances

SCHEMA = {
    "problem": {
        "domain": str, "R": float, "epsilon": float, "k": float, "U0": float, "V0": float,
        "T": float, "law": str, "init_sharpness": float, "sharpness_exponent": float,
    },
    "grid": {"resolution": float, "cells": int},
    "solver": {
        "picard_tol": float, "newton_tol": float, "max_inner_iters": int, "max_picard": int,
        "dt_init": float, "dt_max": float, "dt_min": float, "growth": float, "shrink": float,
    },
    "output": {"snapshot_count": int},
    "run": {"solve": str},
    "sweep": {"k_values": "floats", "epsilon_values": "floats", "grid_refinements": "floats",
              "workers": int},
}
AUTO = ("", "auto", "none", "default")
RUN_MODES = ("system", "limit", "both")
_TOL_KEYS = ("picard_tol", "newton_tol", "max_inner_iters", "max_picard")
_DT_KEYS = ("dt_init", "dt_max", "dt_min", "growth", "shrink")


@dataclass
class RunConfig:
    spec: ProblemSpec
    solve: str = "both"
    source: Path | None = None
    digest: str = ""


@dataclass
class SweepPlan:
    base: ProblemSpec
    k_values: list
    epsilon_values: list
    grid_refinements: list
    output_dir: Path | None = None
    parallel_workers: int = 1
    digest: str = ""
    source: Path | None = None

    def __post_init__(self):
        for name in ("k_values", "epsilon_values", "grid_refinements"):
            if not getattr(self, name):
                raise InvalidParameter(f"sweep {name} must not be empty", field=name)
        if any(b <= a for a, b in zip(self.k_values, self.k_values[1:])):
            raise InvalidParameter("sweep k_values must be strictly increasing", field="k_values")
        if self.parallel_workers < 1:
            raise InvalidParameter("workers must be >= 1", field="workers")


@dataclass
class _Parsed:
    values: dict = field(default_factory=dict)  # (section, key) -> raw string
    lines: dict = field(default_factory=dict)  # (section, key) -> line number
    base_dir: Path = Path(".")
    raw: str = ""


def _locate(text: str):
    """Map (section, key) to the line where it is defined, and list section lines."""
    lines, sections = {}, {}
    current = None
    for no, line in enumerate(text.splitlines(), start=1):
        s = line.strip()
        if not s or s[0] in "#;":
            continue
        m = re.match(r"\[([^\]]+)\]", s)
        if m:
            current = m.group(1).strip()
            sections.setdefault(current, no)
            continue
        key = re.split(r"[=:]", s, maxsplit=1)[0].strip()
        if current is not None:
            lines.setdefault((current, key), no)
    return lines, sections


def _read(text: str, base_dir: Path) -> _Parsed:
    lines, sections = _locate(text)
    cp = configparser.ConfigParser(inline_comment_prefixes=("#", ";"), interpolation=None)
    cp.optionxform = str
    try:
        cp.read_string(text)
    except configparser.MissingSectionHeaderError as exc:
        raise ConfigError("key outside of any [section]", line=exc.lineno) from None
    except configparser.ParsingError as exc:
        line = exc.errors[0][0] if exc.errors else None
        raise ConfigError(f"cannot parse config: {exc.message.splitlines()[0]}", line=line) from None
    except configparser.DuplicateOptionError as exc:
        raise ConfigError(f"duplicate key {exc.option!r}", line=exc.lineno, field=exc.option) from None
    except configparser.DuplicateSectionError as exc:
        raise ConfigError(f"duplicate section [{exc.section}]", line=exc.lineno) from None
    parsed = _Parsed(base_dir=base_dir, raw=text)
    for sec in cp.sections():
        if sec not in SCHEMA:
            raise ConfigError(f"unknown section [{sec}]", line=sections.get(sec))
        for key, val in cp.items(sec):
            if key not in SCHEMA[sec]:
                raise ConfigError(f"unknown key {key!r} in [{sec}]", line=lines.get((sec, key)), field=key)
            parsed.values[(sec, key)] = val.strip()
            parsed.lines[(sec, key)] = lines.get((sec, key))
    return parsed


def _convert(parsed: _Parsed, sec: str, key: str):
    raw = parsed.values.get((sec, key))
    if raw is None or raw.lower() in AUTO:
        return None
    kind = SCHEMA[sec][key]
    line = parsed.lines.get((sec, key))
    try:
        if kind == "floats":
            return [float(x) for x in re.split(r"[,\s]+", raw) if x]
        return kind(raw)
    except ValueError:
        raise ConfigError(f"{key} = {raw!r} is not a valid {getattr(kind, '__name__', kind)}",
                          line=line, field=key) from None


def _spec_from(parsed: _Parsed) -> ProblemSpec:
    get = lambda sec, key: _convert(parsed, sec, key)
    kw = {}
    for key in SCHEMA["problem"]:
        val = get("problem", key)
        if val is None:
            continue
        if key == "law":
            try:
                val = parse_law(val, parsed.base_dir)
            except (InvalidParameter, OSError, ValueError) as exc:
                raise ConfigError(str(exc), line=parsed.lines.get(("problem", "law")), field="law") from None
        kw[key] = val
    for key in ("resolution", "cells"):
        val = get("grid", key)
        if val is not None:
            kw[key] = val
    tol_kw = {k: get("solver", k) for k in _TOL_KEYS if get("solver", k) is not None}
    dt_kw = {k: get("solver", k) for k in _DT_KEYS if get("solver", k) is not None}
    sc = get("output", "snapshot_count")
    if sc is not None:
        kw["snapshot_count"] = sc
    try:
        kw["tolerances"] = SolverTolerances(**tol_kw)
        kw["dt_control"] = DtControl(**dt_kw)
        return ProblemSpec(**kw)
    except InvalidParameter as exc:
        raise ConfigError(str(exc), line=_line_for(parsed, exc.field), field=exc.field) from None


def _line_for(parsed: _Parsed, name):
    if name is None:
        return None
    for (sec, key), line in parsed.lines.items():
        if key == name:
            return line
    return None


def _digest(parsed: _Parsed, sections) -> str:
    """Content hash of the normalized settings (plus any law table they point at)."""
    items = sorted((f"{s}.{k}", v) for (s, k), v in parsed.values.items()
                   if s in sections and (s, k) != ("sweep", "workers"))
    h = hashlib.sha256(json.dumps(items).encode())
    law = parsed.values.get(("problem", "law"), "")
    if law.startswith("custom:"):
        m = re.search(r"path=([^,]+)", law)
        if m:
            p = Path(m.group(1).strip())
            p = p if p.is_absolute() else parsed.base_dir / p
            if p.exists():
                h.update(p.read_bytes())
    return h.hexdigest()[:12]


def _load_text(path) -> tuple[str, Path]:
    path = Path(path)
    try:
        return path.read_text(), path.resolve().parent
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc.strerror}") from None


def parse_run_config(text: str, base_dir=".", source=None) -> RunConfig:
    parsed = _read(text, Path(base_dir))
    spec = _spec_from(parsed)
    solve = parsed.values.get(("run", "solve"), "both").lower()
    if solve not in RUN_MODES:
        raise ConfigError(f"solve must be one of {RUN_MODES}", line=parsed.lines.get(("run", "solve")),
                          field="solve")
    digest = _digest(parsed, ("problem", "grid", "solver", "output", "run"))
    return RunConfig(spec, solve, Path(source) if source else None, digest)


def load_run_config(path) -> RunConfig:
    text, base = _load_text(path)
    return parse_run_config(text, base, path)


def parse_sweep_plan(text: str, base_dir=".", source=None) -> SweepPlan:
    parsed = _read(text, Path(base_dir))
    base = _spec_from(parsed)
    k_values = _convert(parsed, "sweep", "k_values")
    if k_values is None:
        raise ConfigError("[sweep] needs k_values", field="k_values",
                          line=parsed.lines.get(("sweep", "k_values")))
    eps = _convert(parsed, "sweep", "epsilon_values") or [base.epsilon]
    grids = _convert(parsed, "sweep", "grid_refinements") or [base.resolution]
    workers = _convert(parsed, "sweep", "workers")
    workers = 1 if workers is None else workers
    try:
        plan = SweepPlan(base, k_values, eps, grids, parallel_workers=workers, source=source)
    except InvalidParameter as exc:
        raise ConfigError(str(exc), line=_line_for(parsed, exc.field), field=exc.field) from None
    plan.digest = _digest(parsed, tuple(SCHEMA))
    return plan


def load_sweep_plan(path) -> SweepPlan:
    text, base = _load_text(path)
    return parse_sweep_plan(text, base, path)
