"""Empirical estimators built on concomitants of the Y order statistics.

Three estimators share the rank grid t_k = k / (n + 1):

* ``estimate_ratio``   sum X_k w(F_n(Y_k)) / sum w(F_n(Y_k))
* ``estimate_simple``  (1/n) sum X_[k:n] w(t_k) / int w
* ``estimate_premium`` the same with Y = X, an L-statistic

Sums are correctly rounded (see ``_kernels.exact_dot``), so results do not
depend on input order and agree bit-for-bit across kernel backends.

Tie conventions: ``empirical_cdf_values`` gives tied points the max-rank
value; ``concomitant_order`` breaks ties by original index.  The ratio
estimator uses the former, the simple estimator the latter.  On data with
tied ys the direct and concomitant forms of Delta-hat can therefore differ.
"""
from __future__ import annotations

import csv
import math
from dataclasses import dataclass, field

import numpy as np

from ._kernels import exact_dot, exact_sum
from .errors import DataError, ZeroDenominatorError
from .weights import WeightSpec, evaluate, grid_weights, integral, weight_to_dict

__all__ = [
    "PairedSample",
    "ConcomitantView",
    "EstimateReport",
    "read_sample",
    "empirical_cdf_values",
    "concomitant_order",
    "estimate_ratio",
    "delta_hat",
    "delta_hat_direct",
    "estimate_simple",
    "estimate_premium",
]


def _frozen(a, name):
    arr = np.array(a, dtype=np.float64, copy=True).reshape(-1)
    if arr.size == 0:
        raise DataError("empty sample")
    if not np.all(np.isfinite(arr)):
        raise DataError(f"{name} contains non-finite values")
    arr.setflags(write=False)
    return arr


@dataclass(frozen=True, eq=False)
class PairedSample:
    """n observations (x_k, y_k)."""

    xs: np.ndarray
    ys: np.ndarray

    def __post_init__(self):
        xs = _frozen(self.xs, "xs")
        ys = _frozen(self.ys, "ys")
        if xs.shape != ys.shape:
            raise DataError(f"xs and ys differ in length ({xs.size} vs {ys.size})")
        object.__setattr__(self, "xs", xs)
        object.__setattr__(self, "ys", ys)

    @property
    def n(self) -> int:
        return int(self.xs.size)

    @classmethod
    def self_risk(cls, xs) -> PairedSample:
        xs = _frozen(xs, "xs")
        return cls(xs, xs)


def read_sample(path) -> PairedSample:
    """Read a CSV with header ``x,y`` (paired) or ``x`` (premium only; Y = X)."""
    with open(path, newline="") as fh:
        rows = [r for r in csv.reader(fh) if r and any(c.strip() for c in r)]
    if not rows:
        raise DataError("empty sample")
    header = [c.strip().lower() for c in rows[0]]
    if header not in (["x", "y"], ["x"]):
        raise DataError(f"expected header 'x,y' or 'x', got {rows[0]!r}")
    body = rows[1:]
    if not body:
        raise DataError("empty sample")
    try:
        data = np.array([[float(c) for c in r] for r in body], dtype=np.float64)
    except ValueError as exc:
        raise DataError(f"non-numeric CSV field: {exc}") from None
    if data.ndim != 2 or data.shape[1] != len(header):
        raise DataError(f"every row must have {len(header)} column(s)")
    if len(header) == 1:
        return PairedSample.self_risk(data[:, 0])
    return PairedSample(data[:, 0], data[:, 1])


@dataclass(frozen=True, eq=False)
class ConcomitantView:
    y_sorted: np.ndarray
    x_concomitant: np.ndarray
    permutation: np.ndarray


@dataclass
class EstimateReport:
    estimate: float
    variant: str
    n: int
    weight: WeightSpec
    variance_estimate: float | None = None
    ci: tuple[float, float, float] | None = None
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "estimate": self.estimate,
            "variant": self.variant,
            "n": self.n,
            "weight": weight_to_dict(self.weight),
            "variance_estimate": self.variance_estimate,
            "ci": None if self.ci is None else dict(zip(("lower", "upper", "level"), self.ci)),
            "diagnostics": dict(self.diagnostics),
        }


def empirical_cdf_values(ys) -> np.ndarray:
    """(1/(n+1)) #{j : y_j <= y_k} for each k, in input order."""
    ys = np.asarray(ys, dtype=np.float64)
    n = ys.size
    counts = np.searchsorted(np.sort(ys), ys, side="right")
    return counts / (n + 1)


def concomitant_order(s: PairedSample) -> ConcomitantView:
    perm = np.argsort(s.ys, kind="stable")
    return ConcomitantView(s.ys[perm], s.xs[perm], perm)


def estimate_ratio(s: PairedSample, w: WeightSpec) -> EstimateReport:
    wv = evaluate(w, empirical_cdf_values(s.ys))
    den = exact_sum(wv)
    if den == 0.0:
        raise ZeroDenominatorError("weights vanish at every empirical cdf value of the sample")
    est = exact_dot(s.xs, wv) / den
    return EstimateReport(est, "ratio", s.n, w, diagnostics={"weight_sum": den})


def _delta(xs, ys, gw) -> float:
    xc = xs[np.argsort(ys, kind="stable")]
    return exact_dot(xc, gw) / xs.size


def delta_hat(s: PairedSample, w: WeightSpec) -> float:
    """(1/n) sum_k X_[k:n] w(k/(n+1)) over the concomitants."""
    return _delta(s.xs, s.ys, grid_weights(w, s.n))


def delta_hat_direct(s: PairedSample, w: WeightSpec) -> float:
    """(1/n) sum_k X_k w(F_n(Y_k)) in the original order; equals ``delta_hat`` for distinct ys."""
    return exact_dot(s.xs, evaluate(w, empirical_cdf_values(s.ys))) / s.n


def _weight_integral(w):
    total = integral(w)
    if total == 0.0 or not math.isfinite(total):
        raise ZeroDenominatorError(f"weight integral is {total!r}")
    return total


def estimate_simple(s: PairedSample, w: WeightSpec) -> EstimateReport:
    total = _weight_integral(w)
    d = delta_hat(s, w)
    return EstimateReport(d / total, "simple", s.n, w, diagnostics={"delta_hat": d, "w_integral": total})


def estimate_premium(xs, w: WeightSpec) -> EstimateReport:
    xs = _frozen(xs, "xs")
    total = _weight_integral(w)
    d = exact_dot(np.sort(xs), grid_weights(w, xs.size)) / xs.size
    return EstimateReport(d / total, "premium", int(xs.size), w, diagnostics={"delta_hat": d, "w_integral": total})


ESTIMATORS = {
    "ratio": estimate_ratio,
    "simple": estimate_simple,
    "premium": lambda s, w: estimate_premium(s.xs, w),
}
