"""Nonlinear diffusion laws phi, their regularizations and the limit flux.

Every object here exposes two views:

* ``eval`` / ``deriv`` / ``inverse`` -- the checked public API.  Unregularized
  laws reject negative concentrations.
* ``potential`` / ``slope`` -- an unchecked extension to all of R used by the
  implicit stepper, whose Newton iterates may stray slightly below zero.  Power
  laws are extended oddly, s -> sign(s)|s|^m, which keeps them increasing.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from scipy.interpolate import PchipInterpolator

from .errors import DomainError, InvalidParameter

__all__ = [
    "DiffusionLaw",
    "LimitFlux",
    "power_law",
    "linear_oracle_law",
    "custom_law",
    "load_table_law",
    "parse_law",
    "eval_phi",
    "eval_phi_deriv",
    "regularize",
    "invert_phi",
    "eval_limit_flux",
    "check_admissible",
]


def _asarray(s):
    return np.asarray(s, dtype=float)


def _scalarize(x, like):
    return float(x) if np.ndim(like) == 0 else x


@dataclass(frozen=True, eq=False)
class DiffusionLaw:
    """phi(s) = s**m (kind="power") or a tabulated monotone map (kind="custom").

    With ``regularization_n`` set the law is phi(s) + (s - anchor_value)/n,
    which has slope >= 1/n everywhere and agrees with phi at the anchor.
    """

    kind: str = "power"
    m: float = 2.0
    regularization_n: int | None = None
    anchor_value: float | None = None
    oracle_mode: bool = False
    table_s: np.ndarray | None = field(default=None, repr=False)
    table_phi: np.ndarray | None = field(default=None, repr=False)
    _interp: PchipInterpolator | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind == "power":
            if self.m <= 1.0 and not (self.oracle_mode and self.m == 1.0):
                raise InvalidParameter(
                    f"power law exponent must exceed 1 (got m={self.m}); "
                    "m=1 is only available in oracle mode",
                    field="law",
                )
        elif self.kind == "custom":
            if self.table_s is None or self.table_phi is None:
                raise InvalidParameter("custom law needs a table", field="law")
            if self._interp is None:
                object.__setattr__(
                    self, "_interp", PchipInterpolator(self.table_s, self.table_phi)
                )
        else:
            raise InvalidParameter(f"unknown law kind {self.kind!r}", field="law")
        if self.regularization_n is not None and self.anchor_value is None:
            raise InvalidParameter("regularized law needs an anchor value")

    @property
    def regularized(self) -> bool:
        return self.regularization_n is not None

    @property
    def base(self) -> "DiffusionLaw":
        """The law with any regularization stripped."""
        if not self.regularized:
            return self
        return DiffusionLaw(
            kind=self.kind,
            m=self.m,
            oracle_mode=self.oracle_mode,
            table_s=self.table_s,
            table_phi=self.table_phi,
            _interp=self._interp,
        )

    @property
    def s_max(self) -> float:
        return float(self.table_s[-1]) if self.kind == "custom" else np.inf

    # -- unchecked extension to R -------------------------------------------

    def _base_potential(self, s):
        if self.kind == "power":
            if self.m == 2.0:
                return s * np.abs(s)
            if self.m == 1.0:
                return s.copy() if isinstance(s, np.ndarray) else s
            return np.sign(s) * np.abs(s) ** self.m
        a = np.abs(s)
        top = self.s_max
        inside = np.minimum(a, top)
        val = self._interp(inside)
        over = a - inside
        if np.any(over > 0):
            val = val + over * self._interp(top, 1)
        return np.sign(s) * val

    def _base_slope(self, s):
        if self.kind == "power":
            if self.m == 2.0:
                return 2.0 * np.abs(s)
            if self.m == 1.0:
                return np.ones_like(s)
            return self.m * np.abs(s) ** (self.m - 1.0)
        a = np.minimum(np.abs(s), self.s_max)
        return self._interp(a, 1)

    def potential(self, s):
        s = _asarray(s)
        val = self._base_potential(s)
        if self.regularized:
            val = val + (s - self.anchor_value) / self.regularization_n
        return val

    def slope(self, s):
        s = _asarray(s)
        val = self._base_slope(s)
        if self.regularized:
            val = val + 1.0 / self.regularization_n
        return val

    # -- checked public API ---------------------------------------------------

    def _check(self, s, op):
        if self.regularized:
            return
        if np.any(s < 0):
            bad = float(np.min(s))
            raise DomainError(f"{op}: negative concentration s={bad!r} for unregularized law")
        if self.kind == "custom" and np.any(s > self.s_max):
            bad = float(np.max(s))
            raise DomainError(f"{op}: s={bad!r} beyond tabulated range [0, {self.s_max}]")

    def eval(self, s):
        a = _asarray(s)
        self._check(a, "eval_phi")
        return _scalarize(self.potential(a), s)

    def deriv(self, s):
        a = _asarray(s)
        self._check(a, "eval_phi_deriv")
        return _scalarize(self.slope(a), s)

    def inverse(self, y, s_hi=None):
        """Concentration s with eval(s) = y.

        Closed form for plain power laws, vectorized bisection otherwise.
        ``s_hi`` bounds the search for laws without a natural upper end.
        """
        ya = _asarray(y)
        if self.kind == "power" and not self.regularized:
            if np.any(ya < 0):
                raise DomainError(f"invert_phi: y={float(np.min(ya))!r} outside range [0, inf)")
            return _scalarize(ya ** (1.0 / self.m), y)
        if self.kind == "custom" and not self.regularized:
            top = float(self.table_phi[-1])
            if np.any(ya < 0) or np.any(ya > top):
                raise DomainError(f"invert_phi: y outside range [0, {top}]")
            lo = np.zeros_like(ya)
            hi = np.full_like(ya, self.s_max)
        else:
            width = 1.0 if s_hi is None else float(s_hi)
            lo = np.full_like(ya, -width)
            hi = np.full_like(ya, width)
            # expand until bracketed; regularized laws are onto R
            for _ in range(200):
                need = (self.potential(lo) > ya) | (self.potential(hi) < ya)
                if not np.any(need):
                    break
                lo = np.where(need, 2.0 * lo, lo)
                hi = np.where(need, 2.0 * hi, hi)
        return _scalarize(_bisect(self.potential, ya, lo, hi), y)


def _bisect(f, y, lo, hi):
    lo = lo.copy()
    hi = hi.copy()
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if np.all((mid == lo) | (mid == hi)):
            break
        below = f(mid) < y
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
    flo = np.abs(f(lo) - y)
    fhi = np.abs(f(hi) - y)
    return np.where(flo <= fhi, lo, hi)


@dataclass(frozen=True, eq=False)
class LimitFlux:
    """D(s) = phi(s) for s >= 0 and -epsilon*phi(-s) for s < 0."""

    law: DiffusionLaw
    epsilon: float = 0.0

    def __post_init__(self):
        if self.epsilon < 0:
            raise InvalidParameter(f"epsilon must be >= 0 (got {self.epsilon})", field="epsilon")

    def potential(self, s):
        s = _asarray(s)
        base = self.law.base
        pos = base.potential(np.maximum(s, 0.0))
        if self.epsilon == 0.0:
            return pos
        neg = base.potential(np.minimum(s, 0.0))
        return pos + self.epsilon * neg

    def slope(self, s):
        # subgradient at 0 taken from the positive side
        s = _asarray(s)
        base = self.law.base
        return np.where(s >= 0.0, base.slope(s), self.epsilon * base.slope(s))

    def eval(self, s):
        return _scalarize(self.potential(s), s)

    def deriv(self, s):
        return _scalarize(self.slope(s), s)


def power_law(m: float = 2.0) -> DiffusionLaw:
    return DiffusionLaw(kind="power", m=float(m))


def linear_oracle_law() -> DiffusionLaw:
    """phi(s) = s.  Violates phi'(0) = 0; used only for heat-kernel oracles."""
    return DiffusionLaw(kind="power", m=1.0, oracle_mode=True)


def custom_law(s, phi) -> DiffusionLaw:
    s = np.asarray(s, dtype=float)
    phi = np.asarray(phi, dtype=float)
    if s.ndim != 1 or s.shape != phi.shape or s.size < 3:
        raise InvalidParameter("custom law table needs >= 3 (s, phi) rows", field="law")
    if np.any(np.diff(s) <= 0) or np.any(np.diff(phi) <= 0):
        raise InvalidParameter("custom law table must be strictly increasing in both columns", field="law")
    if s[0] != 0.0 or phi[0] != 0.0:
        raise InvalidParameter("custom law table must start at (0, 0)", field="law")
    return DiffusionLaw(kind="custom", table_s=s, table_phi=phi)


def load_table_law(path) -> DiffusionLaw:
    data = np.loadtxt(Path(path), ndmin=2)
    if data.shape[1] != 2:
        raise InvalidParameter(f"{path}: expected two columns (s, phi)", field="law")
    return custom_law(data[:, 0], data[:, 1])


def parse_law(text: str, base_dir=None) -> DiffusionLaw:
    """Parse ``power:m=2.0``, ``power:m=1,oracle=true`` or ``custom:path=...``."""
    kind, _, rest = text.strip().partition(":")
    opts = {}
    for item in filter(None, (p.strip() for p in rest.split(","))):
        key, eq, val = item.partition("=")
        if not eq:
            raise InvalidParameter(f"law option {item!r} is not key=value", field="law")
        opts[key.strip()] = val.strip()
    if kind == "power":
        unknown = set(opts) - {"m", "oracle"}
        if unknown:
            raise InvalidParameter(f"unknown power-law options {sorted(unknown)}", field="law")
        oracle = opts.get("oracle", "false").lower() in ("1", "true", "yes")
        try:
            m = float(opts.get("m", 2.0))
        except ValueError:
            raise InvalidParameter(f"bad exponent {opts['m']!r}", field="law") from None
        return DiffusionLaw(kind="power", m=m, oracle_mode=oracle)
    if kind == "custom":
        if "path" not in opts:
            raise InvalidParameter("custom law needs path=<table file>", field="law")
        p = Path(opts["path"])
        if base_dir is not None and not p.is_absolute():
            p = Path(base_dir) / p
        return load_table_law(p)
    raise InvalidParameter(f"unknown law kind {kind!r}", field="law")


def law_to_text(law: DiffusionLaw) -> str:
    if law.kind == "power":
        return f"power:m={law.m!r}" + (",oracle=true" if law.oracle_mode else "")
    return "custom:table"


# -- operation-style wrappers ---------------------------------------------------


def eval_phi(law: DiffusionLaw, s):
    return law.eval(s)


def eval_phi_deriv(law: DiffusionLaw, s):
    return law.deriv(s)


def regularize(law: DiffusionLaw, n: int, anchor: float) -> DiffusionLaw:
    """phi_n(s) = phi(s) + (s - anchor)/n."""
    if int(n) != n or n < 1:
        raise InvalidParameter(f"regularization index must be a positive integer (got {n})")
    if anchor <= 0:
        raise InvalidParameter(f"regularization anchor must be positive (got {anchor})")
    base = law.base
    return DiffusionLaw(
        kind=base.kind,
        m=base.m,
        regularization_n=int(n),
        anchor_value=float(anchor),
        oracle_mode=base.oracle_mode,
        table_s=base.table_s,
        table_phi=base.table_phi,
        _interp=base._interp,
    )


def invert_phi(law: DiffusionLaw, y):
    return law.inverse(y)


def eval_limit_flux(flux: LimitFlux, s):
    return flux.eval(s)


def check_admissible(law: DiffusionLaw, s_max: float, n_probe: int = 257) -> None:
    """Raise InvalidParameter unless phi(0)=phi'(0)=0 and phi, phi' strictly increase on [0, s_max]."""
    if law.oracle_mode:
        raise InvalidParameter("oracle-mode laws are excluded from admissibility", field="law")
    base = law.base
    if base.eval(0.0) != 0.0 or abs(base.deriv(0.0)) > 1e-12:
        raise InvalidParameter("law must satisfy phi(0) = phi'(0) = 0", field="law")
    s = np.linspace(0.0, s_max, n_probe)
    if np.any(np.diff(base.eval(s)) <= 0):
        raise InvalidParameter("phi is not strictly increasing on the probe set", field="law")
    if np.any(np.diff(base.deriv(s)) <= 0):
        raise InvalidParameter("phi' is not strictly increasing on the probe set", field="law")
