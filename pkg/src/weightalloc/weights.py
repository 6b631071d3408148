"""Weight functions on (0, 1) and numerical checks of their regularity.

A weight is an immutable :class:`WeightSpec`; calling it (or
:func:`evaluate`) maps t in the open unit interval to w(t).  Nothing here
ever evaluates a weight at 0 or 1.

The ``check_*`` functions return numerical evidence, not proofs: each report
carries a ``grid_stable`` flag telling whether the estimated constant
survived grid refinement.
"""
from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from typing import ClassVar

import numpy as np

from ._quad import integrate_interval, integrate_unit
from .errors import DomainError, InvalidSpecError

__all__ = [
    "WeightSpec",
    "Indicator",
    "ProportionalHazards",
    "SGini",
    "Constant",
    "Tabulated",
    "PartitionSpec",
    "LqReport",
    "ConditionReport",
    "evaluate",
    "integral",
    "grid_weights",
    "density",
    "check_lq",
    "check_tail_growth",
    "check_hoelder",
    "check_partition",
    "weight_to_dict",
    "weight_from_dict",
    "weight_from_json",
]


def _check_unit_points(points, what):
    pts = tuple(float(p) for p in points)
    for p in pts:
        if not 0.0 < p < 1.0:
            raise InvalidSpecError(f"{what} {p!r} is not strictly inside (0, 1)")
    if any(b <= a for a, b in zip(pts, pts[1:])):
        raise InvalidSpecError(f"{what} must be strictly increasing: {pts}")
    return pts


@dataclass(frozen=True)
class WeightSpec:
    """Base class.  Subclasses implement ``_raw`` on a float array in (0, 1)."""

    declared_breakpoints: tuple[float, ...] = field(default=(), kw_only=True)
    tail_exponents: tuple[float, float] | None = field(default=None, kw_only=True)

    kind: ClassVar[str] = "custom"

    def __post_init__(self):
        object.__setattr__(
            self, "declared_breakpoints", _check_unit_points(self.declared_breakpoints, "breakpoint")
        )
        if self.tail_exponents is not None:
            k1, k2 = (float(k) for k in self.tail_exponents)
            if not (0.0 <= k1 < 1.0 and 0.0 <= k2 < 1.0):
                raise InvalidSpecError(f"tail exponents must lie in [0, 1): {(k1, k2)}")
            object.__setattr__(self, "tail_exponents", (k1, k2))

    def _raw(self, t: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def _intrinsic_breakpoints(self) -> tuple[float, ...]:
        return ()

    @property
    def breakpoints(self) -> tuple[float, ...]:
        """Points where w may jump, sorted and deduplicated."""
        return tuple(sorted(set(self._intrinsic_breakpoints()) | set(self.declared_breakpoints)))

    def nondifferentiable_points(self) -> tuple[float, ...]:
        return self.breakpoints

    def __call__(self, t):
        return evaluate(self, t)


@dataclass(frozen=True)
class Indicator(WeightSpec):
    """w(t) = 1{t > p}; tail conditional expectation."""

    p: float
    kind: ClassVar[str] = "indicator"

    def __post_init__(self):
        super().__post_init__()
        if not 0.0 < self.p < 1.0:
            raise InvalidSpecError(f"indicator level p={self.p!r} must lie in (0, 1)")

    def _raw(self, t):
        return np.where(t > self.p, 1.0, 0.0)

    def _intrinsic_breakpoints(self):
        return (float(self.p),)


@dataclass(frozen=True)
class ProportionalHazards(WeightSpec):
    """w(t) = nu (1 - t)^(nu - 1)."""

    nu: float
    kind: ClassVar[str] = "ph"

    def __post_init__(self):
        super().__post_init__()
        if not self.nu > 0.0:
            raise InvalidSpecError(f"nu={self.nu!r} must be positive")

    def _raw(self, t):
        return self.nu * np.power(1.0 - t, self.nu - 1.0)


@dataclass(frozen=True)
class SGini(ProportionalHazards):
    """Same formula as the proportional hazards weight, restricted to nu >= 1."""

    kind: ClassVar[str] = "sgini"

    def __post_init__(self):
        super().__post_init__()
        if self.nu < 1.0:
            raise InvalidSpecError(f"S-Gini weight needs nu >= 1, got {self.nu!r}")


@dataclass(frozen=True)
class Constant(WeightSpec):
    c: float = 1.0
    kind: ClassVar[str] = "constant"

    def __post_init__(self):
        super().__post_init__()
        if not math.isfinite(self.c):
            raise InvalidSpecError(f"constant weight must be finite, got {self.c!r}")

    def _raw(self, t):
        return np.full_like(t, float(self.c))


@dataclass(frozen=True)
class Tabulated(WeightSpec):
    """User weight given on a grid of (t, w) nodes.

    Linear interpolation between nodes, constant extrapolation beyond the
    outermost ones.  Two nodes sharing the same t encode a jump; the value
    at the jump is the right-hand one.  The nodes must reach within
    ``delta`` of both endpoints.
    """

    grid: tuple[tuple[float, float], ...]
    delta: float = 0.01
    kind: ClassVar[str] = "tabulated"

    def __post_init__(self):
        try:
            grid = tuple((float(t), float(v)) for t, v in self.grid)
        except (TypeError, ValueError) as exc:
            raise InvalidSpecError(f"tabulated grid must be a list of [t, w] pairs: {exc}") from None
        object.__setattr__(self, "grid", grid)
        super().__post_init__()
        if len(grid) < 2:
            raise InvalidSpecError("tabulated grid needs at least two nodes")
        ts = np.array([g[0] for g in grid])
        ws = np.array([g[1] for g in grid])
        if not np.all(np.isfinite(ws)):
            raise InvalidSpecError("tabulated weight values must be finite")
        if np.any(ts <= 0.0) or np.any(ts >= 1.0):
            raise InvalidSpecError("tabulated nodes must lie strictly inside (0, 1)")
        dt = np.diff(ts)
        if np.any(dt < 0.0):
            raise InvalidSpecError("tabulated nodes must be sorted by t")
        if np.any((dt[:-1] == 0.0) & (dt[1:] == 0.0)):
            raise InvalidSpecError("at most two nodes may share a t value")
        if not 0.0 < self.delta < 0.5:
            raise InvalidSpecError(f"coverage delta={self.delta!r} must lie in (0, 1/2)")
        if ts[0] > self.delta or ts[-1] < 1.0 - self.delta:
            raise InvalidSpecError(
                f"tabulated grid must cover ({self.delta}, {1 - self.delta}); got [{ts[0]}, {ts[-1]}]"
            )

    @property
    def _nodes(self):
        return np.array([g[0] for g in self.grid]), np.array([g[1] for g in self.grid])

    def _raw(self, t):
        ts, ws = self._nodes
        i = np.searchsorted(ts, t, side="right")
        inner = np.clip(i, 1, len(ts) - 1)
        t0, t1 = ts[inner - 1], ts[inner]
        w0, w1 = ws[inner - 1], ws[inner]
        span = np.where(t1 > t0, t1 - t0, 1.0)
        lin = w0 + (w1 - w0) * (t - t0) / span
        return np.where(i == 0, ws[0], np.where(i == len(ts), ws[-1], lin))

    def _intrinsic_breakpoints(self):
        ts = [g[0] for g in self.grid]
        return tuple(a for a, b in zip(ts, ts[1:]) if a == b)

    def nondifferentiable_points(self):
        ts, ws = self._nodes
        slopes = np.zeros(len(ts) + 1)
        dt = np.diff(ts)
        with np.errstate(divide="ignore", invalid="ignore"):
            slopes[1:-1] = np.where(dt > 0, np.diff(ws) / np.where(dt > 0, dt, 1.0), np.nan)
        kinks = {float(t) for t, a, b in zip(ts, slopes[:-1], slopes[1:]) if not a == b}
        return tuple(sorted(kinks | set(self.breakpoints)))


def evaluate(w: WeightSpec, t):
    """w(t) for scalar or array t; every t must lie strictly inside (0, 1)."""
    arr = np.asarray(t, dtype=np.float64)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise DomainError("weights are only evaluated strictly inside (0, 1)")
    out = w._raw(np.atleast_1d(arr))
    if arr.ndim == 0:
        return float(out[0])
    return out.reshape(arr.shape)


def integral(w: WeightSpec) -> float:
    """Integral of w over (0, 1)."""
    if type(w) is Indicator:
        return 1.0 - w.p
    if type(w) in (ProportionalHazards, SGini):
        return 1.0
    if type(w) is Constant:
        return float(w.c)
    points = w.nondifferentiable_points()
    return integrate_unit(lambda t: float(w._raw(np.array([t]))[0]), points=points).value


def grid_weights(w: WeightSpec, n: int) -> np.ndarray:
    """[w(1/(n+1)), ..., w(n/(n+1))]."""
    if n < 1:
        raise DomainError(f"n must be positive, got {n}")
    t = np.arange(1, n + 1, dtype=np.float64) / (n + 1)
    return evaluate(w, t)


def density(w: WeightSpec):
    """The normalised weight w / integral(w) as a vectorised callable."""
    total = integral(w)
    if total == 0.0 or not math.isfinite(total):
        raise DomainError(f"cannot normalise a weight with integral {total!r}")
    return lambda t: evaluate(w, t) / total


# --------------------------------------------------------------------------
# regularity checks
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class LqReport:
    finite: bool
    estimate: float
    q: float
    power: float
    endpoint_exponents: tuple[float, float] = (math.nan, math.nan)
    inconclusive: bool = False


@dataclass(frozen=True)
class ConditionReport:
    passed: bool
    constant: float
    grid_stable: bool
    constants_by_level: dict = field(default_factory=dict)
    failure_location: float | None = None
    message: str = ""


_STABILITY_SLACK = 0.05


def _endpoint_exponent(f, side):
    # local power-law exponent of f(d) as the distance d to the endpoint shrinks
    d1, d2 = 1e-8, 1e-12
    if side == 0:
        ts, ds = np.array([d1, d2]), np.array([d1, d2])
    else:
        ts = 1.0 - np.array([d1, d2])
        ds = 1.0 - ts
    f1, f2 = f(ts)
    if f1 == 0.0 and f2 == 0.0:
        return math.inf
    if f1 == 0.0 or f2 == 0.0:
        return math.nan
    return math.log(f2 / f1) / math.log(ds[1] / ds[0])


def check_lq(w: WeightSpec, q: float, power: float = 1.0) -> LqReport:
    """Numerical evidence on whether |w|^power lies in L_q on (0, 1).

    ``estimate`` is the norm ||w^power||_q (the essential sup for q = inf).
    Finite q decides integrability from the local power-law exponent of
    |w|^(power*q) at each endpoint; the norm comes from adaptive quadrature
    over the whole interval, breakpoints included.
    """
    q = float(q)
    if q < 1.0:
        raise DomainError(f"q must be in [1, inf], got {q}")
    if power < 1.0:
        raise DomainError(f"power must be >= 1, got {power}")

    if math.isinf(q):
        sups = []
        for depth in (1e-4, 1e-8, 1e-12):
            d = np.geomspace(0.5, depth, 400)
            t = np.concatenate([d, 1.0 - d, np.linspace(0.001, 0.999, 2001)])
            sups.append(float(np.max(np.abs(evaluate(w, t)) ** power)))
        stable = sups[-1] <= sups[0] * (1.0 + 0.01) + 1e-300
        return LqReport(stable, sups[-1] if stable else math.inf, q, power, inconclusive=not stable)

    expo = power * q

    def f(t):
        return np.abs(evaluate(w, np.asarray(t))) ** expo

    alphas = (_endpoint_exponent(f, 0), _endpoint_exponent(f, 1))
    ends_ok = all(a > -1.0 + 1e-4 for a in alphas if not math.isnan(a))
    inconclusive = any(math.isnan(a) or abs(a + 1.0) < 1e-2 for a in alphas)
    if not ends_ok:
        return LqReport(False, math.inf, q, power, alphas, inconclusive)

    total, _, _ = integrate_interval(lambda s: float(f(np.array([s]))[0]), 0.0, 1.0, w.breakpoints)
    return LqReport(bool(math.isfinite(total)), total ** (1.0 / q), q, power, alphas, inconclusive)


def _tail_grid(epsilon, depth, per_decade=25):
    decades = max(math.log10(epsilon / depth), 1.0)
    d = np.geomspace(epsilon, depth, int(decades * per_decade) + 1)[1:]
    return np.concatenate([d, 1.0 - d])


def check_tail_growth(w: WeightSpec, kappa1: float, kappa2: float, epsilon: float) -> ConditionReport:
    """Smallest c with t(1-t)|w'(t)| and |w(t)| <= c t^(-kappa1/2) (1-t)^(-kappa2/2) near both endpoints.

    The grid approaches the endpoints to depths 1e-6, 1e-9, 1e-12; the
    bound passes if the constant does not keep growing with depth.
    """
    if not (0.0 <= kappa1 < 1.0 and 0.0 <= kappa2 < 1.0):
        raise DomainError("kappa1, kappa2 must lie in [0, 1)")
    if not 0.0 < epsilon < 0.5:
        raise DomainError("epsilon must lie in (0, 1/2)")

    for b in w.nondifferentiable_points():
        if b < epsilon or b > 1.0 - epsilon:
            return ConditionReport(
                False, math.inf, False, failure_location=float(b),
                message=f"w is not differentiable at {b!r} inside the tail region",
            )

    consts = {}
    for depth in (1e-6, 1e-9, 1e-12):
        t = _tail_grid(epsilon, depth)
        near = np.minimum(t, 1.0 - t)
        h = 0.01 * near
        tp, tm = t + h, t - h
        deriv = (evaluate(w, tp) - evaluate(w, tm)) / (tp - tm)
        one_minus = 1.0 - t
        bound = t ** (-kappa1 / 2.0) * one_minus ** (-kappa2 / 2.0)
        wv = evaluate(w, t)
        ratio = np.maximum(t * one_minus * np.abs(deriv), np.abs(wv)) / bound
        if not np.all(np.isfinite(ratio)):
            bad = float(t[~np.isfinite(ratio)][0])
            return ConditionReport(False, math.inf, False, consts, bad, "non-finite value or derivative")
        consts[depth] = float(np.max(ratio))
    c_shallow, c_deep = consts[1e-6], consts[1e-12]
    stable = c_deep <= c_shallow * (1.0 + _STABILITY_SLACK) + 1e-12
    msg = "" if stable else "bound constant keeps growing towards the endpoints"
    return ConditionReport(stable, c_deep, stable, consts, None, msg)


def check_hoelder(w: WeightSpec, r: float, epsilon: float) -> ConditionReport:
    """Hoelder constant sup |w(u)-w(v)|/|u-v|^r on each smooth piece of (eps, 1-eps)."""
    if not r > 0.5:
        raise DomainError(f"Hoelder exponent must exceed 1/2, got {r}")
    if not 0.0 < epsilon < 0.5:
        raise DomainError("epsilon must lie in (0, 1/2)")
    cuts = [b for b in w.breakpoints if epsilon < b < 1.0 - epsilon]
    edges = [epsilon, *cuts, 1.0 - epsilon]

    consts = {}
    for npts in (128, 512):
        c = 0.0
        for a, b in zip(edges, edges[1:]):
            t = np.linspace(a, b, npts + 2)[1:-1]
            wv = evaluate(w, t)
            iu = np.triu_indices(npts, 1)
            ratio = np.abs(wv[iu[0]] - wv[iu[1]]) / np.abs(t[iu[0]] - t[iu[1]]) ** r
            c = max(c, float(np.max(ratio)))
        consts[npts] = c
    stable = consts[512] <= consts[128] * (1.0 + _STABILITY_SLACK) + 1e-12
    msg = "" if stable else "difference quotients grow under refinement (undeclared jump?)"
    return ConditionReport(stable, consts[512], stable, consts, None, msg)


@dataclass(frozen=True)
class PartitionSpec:
    """Points 0 = a_0 < a_1 < ... < a_j = 1 and a neighbourhood radius epsilon."""

    points: tuple[float, ...]
    epsilon: float

    def __post_init__(self):
        pts = tuple(float(p) for p in self.points)
        object.__setattr__(self, "points", pts)
        if len(pts) < 2 or pts[0] != 0.0 or pts[-1] != 1.0:
            raise InvalidSpecError("partition must start at 0 and end at 1")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise InvalidSpecError("partition points must be strictly increasing")
        if not 0.0 < self.epsilon < min(b - a for a, b in zip(pts, pts[1:])):
            raise InvalidSpecError("epsilon must be positive and smaller than every subinterval")

    def intervals(self):
        """Pairs (A_i, B_i): the open subinterval and its epsilon-neighbourhood within (0, 1)."""
        out = []
        for a, b in zip(self.points, self.points[1:]):
            out.append(((a, b), (max(a - self.epsilon, 0.0), min(b + self.epsilon, 1.0))))
        return out


def check_partition(w: WeightSpec, partition: PartitionSpec, qs, power: float = 1.0) -> list[LqReport]:
    """L_q membership of w restricted to each subinterval A_i, with its own q_i."""
    qs = list(qs)
    if len(qs) != len(partition.points) - 1:
        raise DomainError("need one exponent per subinterval")
    reports = []
    for ((a, b), _), q in zip(partition.intervals(), qs):
        reports.append(check_lq(_Restricted(w, a, b), q, power))
    return reports


class _Restricted(WeightSpec):
    # w * 1{lo < t < hi}; only used by check_partition

    def __init__(self, base, lo, hi):
        object.__setattr__(self, "base", base)
        object.__setattr__(self, "lo", lo)
        object.__setattr__(self, "hi", hi)
        object.__setattr__(self, "declared_breakpoints", ())
        object.__setattr__(self, "tail_exponents", None)

    def _raw(self, t):
        return np.where((t > self.lo) & (t < self.hi), self.base._raw(t), 0.0)

    def _intrinsic_breakpoints(self):
        inner = tuple(p for p in (self.lo, self.hi) if 0.0 < p < 1.0)
        return tuple(sorted(set(inner) | set(self.base.breakpoints)))


# --------------------------------------------------------------------------
# JSON
# --------------------------------------------------------------------------

def weight_to_dict(w: WeightSpec) -> dict:
    if isinstance(w, Indicator):
        d = {"kind": "indicator", "p": w.p}
    elif isinstance(w, ProportionalHazards):
        d = {"kind": w.kind, "nu": w.nu}
    elif isinstance(w, Constant):
        d = {"kind": "constant", "c": w.c}
    elif isinstance(w, Tabulated):
        d = {"kind": "tabulated", "grid": [list(g) for g in w.grid], "delta": w.delta}
    else:
        raise InvalidSpecError(f"cannot serialise weight of type {type(w).__name__}")
    if w.declared_breakpoints:
        d["breakpoints"] = list(w.declared_breakpoints)
    if w.tail_exponents is not None:
        d["tail_exponents"] = list(w.tail_exponents)
    return d


def weight_from_dict(d: dict) -> WeightSpec:
    if not isinstance(d, dict) or "kind" not in d:
        raise InvalidSpecError(f"weight spec must be an object with a 'kind': {d!r}")
    extra = {}
    if "breakpoints" in d:
        extra["declared_breakpoints"] = tuple(d["breakpoints"])
    if d.get("tail_exponents") is not None:
        extra["tail_exponents"] = tuple(d["tail_exponents"])
    kind = d["kind"]
    try:
        if kind == "indicator":
            return Indicator(float(d["p"]), **extra)
        if kind == "ph":
            return ProportionalHazards(float(d["nu"]), **extra)
        if kind == "sgini":
            return SGini(float(d["nu"]), **extra)
        if kind == "constant":
            return Constant(float(d.get("c", 1.0)), **extra)
        if kind == "tabulated":
            return Tabulated(tuple(tuple(g) for g in d["grid"]), float(d.get("delta", 0.01)), **extra)
    except KeyError as exc:
        raise InvalidSpecError(f"weight kind {kind!r} is missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidSpecError):
            raise
        raise InvalidSpecError(f"bad weight spec {d!r}: {exc}") from None
    raise InvalidSpecError(f"unknown weight kind {kind!r}")


def weight_from_json(text: str) -> WeightSpec:
    try:
        return weight_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise InvalidSpecError(f"weight JSON does not parse: {exc}") from None
