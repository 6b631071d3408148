"""Asymptotic variance of the simple estimator and the intervals built from it.

    sigma^2 = (sigma1^2 + sigma2^2) / (int w)^2
    sigma1^2 = int v2(t) w(t)^2 dt
    sigma2^2 = int int w(s) w(t) (min(s, t) - s t) dg(s) dg(t)

with g and v2 the quantile-regression and conditional-variance curves.

The double Stieltjes integral is discretised on a node grid with the mass
of g spread uniformly over each cell.  Rather than summing the N^2 kernel
terms, it is evaluated as the variance of the piecewise-linear function
L(u) = int_{(0,u]} w dg under the uniform law on (0, 1): the two agree
exactly (the kernel is the Brownian-bridge covariance), this form costs
O(N) and is nonnegative by construction.  ``_kernels.bridge_double_sum``
keeps the direct O(N^2) sum as an independent check.

Model curves are integrated on nodes uniform in logit(t), with the weight's
breakpoints inserted, so cells shrink geometrically towards both endpoints.
Integrands that still blow up like a power at the truncation point get the
slab beyond it from the fitted power law.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import _config as cfg
from ._kernels import window_moments
from ._rng import derive_seed, generator
from .distributions import ModelSpec
from .empirical import EstimateReport, PairedSample, _delta, concomitant_order, estimate_simple
from .errors import (
    DivergenceError,
    DomainError,
    InferenceUnsafeError,
    SampleTooSmallError,
    ZeroDenominatorError,
)
from .weights import WeightSpec, evaluate, grid_weights, integral

__all__ = [
    "VarianceReport",
    "CurveEstimate",
    "logit_nodes",
    "bridge_variance",
    "sigma1_sq",
    "sigma2_sq",
    "sigma_sq_oracle",
    "plugin_curves",
    "sigma_sq_plugin",
    "bootstrap_variance",
    "confidence_interval",
    "normal_critical_value",
]


@dataclass
class VarianceReport:
    sigma1_sq: float | None
    sigma2_sq: float | None
    sigma_sq: float
    w_integral: float
    method: str
    grid_size: int
    truncation: float
    diagnostics: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "sigma1_sq": self.sigma1_sq,
            "sigma2_sq": self.sigma2_sq,
            "sigma_sq": self.sigma_sq,
            "w_integral": self.w_integral,
            "method": self.method,
            "grid_size": self.grid_size,
            "truncation": self.truncation,
            "diagnostics": dict(self.diagnostics),
        }


@dataclass(frozen=True, eq=False)
class CurveEstimate:
    grid: np.ndarray
    g_hat: np.ndarray
    v2_hat: np.ndarray
    window: int


def _check_grid_args(grid_size, truncation):
    if grid_size < 100:
        raise DomainError(f"grid_size must be at least 100, got {grid_size}")
    if not 0.0 < truncation <= 0.01:
        raise DomainError(f"truncation must lie in (0, 0.01], got {truncation}")


def logit_nodes(grid_size: int, truncation: float, breakpoints=()) -> np.ndarray:
    """grid_size cells uniform in logit(t) on [truncation, 1 - truncation], plus breakpoints."""
    x = np.linspace(special.logit(truncation), special.logit(1.0 - truncation), grid_size + 1)
    u = special.expit(x)
    inside = [b for b in breakpoints if u[0] < b < u[-1]]
    return np.unique(np.concatenate([u, inside])) if inside else u


_TAIL_STRIDE = 64


def _power_fit(d, vals):
    """(A, B, beta) with vals = A + B d^beta through three points whose d shrink geometrically.

    None when the values are not blowing up like a power (flat, logarithmic,
    or converging), in which case holding the last value is accurate enough.
    """
    d1, d2, d3 = d
    q = d3 / d2
    if not (q > 0.0 and abs(d2 / d1 - q) <= 1e-2 * q):
        return None
    inc1, inc2 = vals[1] - vals[0], vals[2] - vals[1]
    if inc1 == 0.0 or inc2 == 0.0 or (inc1 > 0.0) != (inc2 > 0.0):
        return None
    beta = math.log(inc2 / inc1) / math.log(q)
    if beta > -1e-3:
        return None
    b = inc2 / (d3**beta - d2**beta)
    return vals[2] - b * d3**beta, b, beta


def bridge_variance(nodes, g_nodes, w_mid, tails: bool = False) -> float:
    """Discrete sigma2^2 for g given at ``nodes`` and w at the cell midpoints.

    Equals sum_ij a_i a_j K_ij with a_i = w_mid[i] * (g[i+1] - g[i]) and K
    the Brownian-bridge kernel averaged over cells i and j.  Outside the
    nodes L is held at its end values, or with ``tails`` extended by the
    power law A + B d^beta fitted to the three outermost nodes (d being
    the distance to the endpoint); beta <= -1/2 means sigma2 is infinite.
    """
    u = np.asarray(nodes, dtype=np.float64)
    a = np.asarray(w_mid, dtype=np.float64) * np.diff(np.asarray(g_nodes, dtype=np.float64))
    h = np.diff(u)
    L = np.concatenate(([0.0], np.cumsum(a)))
    ends = [(u[0], L[0], None), (1.0 - u[-1], L[-1], None)]
    if tails and u.size >= 9:
        # fit points a stride apart: 1 - u carries rounding noise near u = 1
        k = min(_TAIL_STRIDE, (u.size - 1) // 4)
        lo, hi = [2 * k, k, 0], [-1 - 2 * k, -1 - k, -1]
        ends = [
            (u[0], L[0], _power_fit(u[lo], L[lo])),
            (1.0 - u[-1], L[-1], _power_fit(1.0 - u[hi], L[hi])),
        ]
    for _, _, fit in ends:
        if fit is not None and fit[2] <= -0.5:
            raise DivergenceError(f"L grows like d^{fit[2]:.3f} at an endpoint; sigma2^2 is infinite")

    def slab_mean(d0, last, fit):
        if fit is None:
            return d0 * last
        A, B, beta = fit
        return A * d0 + B * d0 ** (beta + 1.0) / (beta + 1.0)

    def slab_sq(d0, last, fit, mu):
        if fit is None:
            return d0 * (last - mu) ** 2
        A, B, beta = fit
        c = A - mu
        return c * c * d0 + 2.0 * c * B * d0 ** (beta + 1.0) / (beta + 1.0) + B * B * d0 ** (2.0 * beta + 1.0) / (
            2.0 * beta + 1.0
        )

    mean = np.sum(h * (L[:-1] + L[1:])) / 2.0 + sum(slab_mean(*e) for e in ends)
    c = L - mean
    inner = np.sum(h * (c[:-1] ** 2 + c[:-1] * c[1:] + c[1:] ** 2)) / 3.0
    return float(inner + sum(slab_sq(*e, mean) for e in ends))


def _curve_on(curve, t, name):
    vals = np.asarray(curve(t), dtype=np.float64)
    if vals.shape != t.shape:
        vals = np.broadcast_to(vals, t.shape).astype(np.float64)
    if not np.all(np.isfinite(vals)):
        raise DivergenceError(f"{name} curve is not finite on the grid")
    return vals


def _slab_integral(d, f, d0):
    # int_0^d0 of a positive integrand behaving like C d^alpha, fitted at two points
    if not (f[0] > 0.0 and f[1] > 0.0):
        return 0.0
    alpha = math.log(f[1] / f[0]) / math.log(d[1] / d[0])
    if alpha > -1e-3:
        return 0.0
    if alpha <= -1.0:
        raise DivergenceError(f"integrand grows like d^{alpha:.3f} at an endpoint; sigma1^2 is infinite")
    return f[1] / d[1] ** alpha * d0 ** (alpha + 1.0) / (alpha + 1.0)


def _sigma1_on(v2_curve, w, nodes):
    mid = 0.5 * (nodes[1:] + nodes[:-1])
    v2 = _curve_on(v2_curve, mid, "conditional variance")
    if np.any(v2 < 0.0):
        raise DomainError("conditional variance curve went negative")
    f = v2 * evaluate(w, mid) ** 2
    body = float(np.sum(f * np.diff(nodes)))
    k = min(_TAIL_STRIDE, (mid.size - 1) // 2)
    lo = _slab_integral(mid[[k, 0]], f[[k, 0]], nodes[0])
    hi = _slab_integral(1.0 - mid[[-1 - k, -1]], f[[-1 - k, -1]], 1.0 - nodes[-1])
    return body + lo + hi


def _sigma2_on(g_curve, w, nodes):
    mid = 0.5 * (nodes[1:] + nodes[:-1])
    return bridge_variance(nodes, _curve_on(g_curve, nodes, "regression"), evaluate(w, mid), tails=True)


def _refined(fn, curve, w, grid_size, truncation, what):
    coarse = fn(curve, w, logit_nodes(grid_size, truncation, w.breakpoints))
    fine = fn(curve, w, logit_nodes(2 * grid_size, truncation, w.breakpoints))
    scale = max(abs(coarse), abs(fine))
    change = abs(fine - coarse) / scale if scale > 1e-300 else 0.0
    if change > cfg.REFINEMENT_TOLERANCE:
        raise DivergenceError(f"{what} moved by {change:.2%} when the grid was doubled")
    return coarse, change


def sigma1_sq(v2_curve, w: WeightSpec, grid_size: int = cfg.DEFAULT_GRID_SIZE,
              truncation: float = cfg.DEFAULT_TRUNCATION) -> float:
    """int v2(t) w(t)^2 dt over (truncation, 1 - truncation); ``v2_curve`` must accept arrays."""
    _check_grid_args(grid_size, truncation)
    return _refined(_sigma1_on, v2_curve, w, grid_size, truncation, "sigma1^2")[0]


def sigma2_sq(g_curve, w: WeightSpec, grid_size: int = cfg.DEFAULT_GRID_SIZE,
              truncation: float = cfg.DEFAULT_TRUNCATION) -> float:
    """Double Stieltjes integral of w(s) w(t) (min(s,t) - st) against g; ``g_curve`` must accept arrays."""
    _check_grid_args(grid_size, truncation)
    return _refined(_sigma2_on, g_curve, w, grid_size, truncation, "sigma2^2")[0]


def _nonzero_integral(w):
    total = integral(w)
    if total == 0.0:
        raise ZeroDenominatorError("weight integrates to zero")
    return total


def sigma_sq_oracle(model: ModelSpec, w: WeightSpec, grid_size: int = cfg.DEFAULT_GRID_SIZE,
                    truncation: float = cfg.DEFAULT_TRUNCATION) -> VarianceReport:
    if not model.inference_safe:
        raise InferenceUnsafeError(f"{type(model).__name__} has infinite Var[X]; sigma^2 is undefined")
    _check_grid_args(grid_size, truncation)
    total = _nonzero_integral(w)
    s1, ch1 = _refined(_sigma1_on, model.conditional_variance_curve, w, grid_size, truncation, "sigma1^2")
    s2, ch2 = _refined(_sigma2_on, model.regression_curve, w, grid_size, truncation, "sigma2^2")
    return VarianceReport(
        s1, s2, (s1 + s2) / total**2, total, "oracle", grid_size, truncation,
        diagnostics={"refinement_change_sigma1": ch1, "refinement_change_sigma2": ch2},
    )


def plugin_curves(s: PairedSample, window: int | None = None) -> CurveEstimate:
    """Local averages of the concomitants over rank windows [k-m, k+m]; default m = ceil(sqrt(n))."""
    n = s.n
    if n < 5:
        raise SampleTooSmallError(f"plug-in curves need n >= 5, got {n}")
    m = math.ceil(math.sqrt(n)) if window is None else int(window)
    if m < 1:
        raise DomainError("window half-width must be positive")
    xc = concomitant_order(s).x_concomitant
    g_hat, v2_hat = window_moments(xc, m)
    grid = np.arange(1, n + 1, dtype=np.float64) / (n + 1)
    return CurveEstimate(grid, g_hat, v2_hat, m)


def sigma_sq_plugin(s: PairedSample, w: WeightSpec, window: int | None = None) -> VarianceReport:
    """sigma^2 with estimated curves on the rank grid, dropping ceil(n^(1/4)) ranks at each end."""
    total = _nonzero_integral(w)
    curves = plugin_curves(s, window)
    n = s.n
    r = math.ceil(n**0.25)
    keep = slice(r, n - r)
    t, g, v2 = curves.grid[keep], curves.g_hat[keep], curves.v2_hat[keep]
    if t.size < 2:
        raise SampleTooSmallError("nothing left after trimming the outer ranks")
    s1 = float(np.sum(v2 * evaluate(w, t) ** 2)) / (n + 1)
    mid = 0.5 * (t[1:] + t[:-1])
    s2 = bridge_variance(t, g, evaluate(w, mid))
    return VarianceReport(
        s1, s2, (s1 + s2) / total**2, total, "plugin", int(t.size), float(t[0]),
        diagnostics={"window": curves.window, "trimmed_ranks": r},
    )


def bootstrap_variance(s: PairedSample, w: WeightSpec, B: int = 1000, seed: int = 0,
                       workers: int = 1) -> VarianceReport:
    """n times the variance of the simple estimator over B pair resamples.

    Resample b draws its indices from a stream keyed by (seed, b), so the
    result does not depend on ``workers``.
    """
    if B < 1:
        raise DomainError("need at least one bootstrap resample")
    n = s.n
    total = _nonzero_integral(w)
    gw = grid_weights(w, n)
    xs, ys = s.xs, s.ys

    def one(b):
        idx = generator(derive_seed(seed, b)).integers(0, n, n)
        return _delta(xs[idx], ys[idx], gw) / total

    if workers > 1:
        with ThreadPoolExecutor(workers) as pool:
            ests = np.fromiter(pool.map(one, range(B)), dtype=np.float64, count=B)
    else:
        ests = np.fromiter((one(b) for b in range(B)), dtype=np.float64, count=B)

    diagnostics = {"B": B}
    if B < 2:
        var = 0.0
        diagnostics["degenerate"] = True
    elif np.ptp(ests) == 0.0:
        var = 0.0
    else:
        var = n * float(np.var(ests, ddof=1))
    if B < 100:
        diagnostics["few_resamples"] = True
    return VarianceReport(None, None, var, total, "bootstrap", n, 0.0, diagnostics)


def normal_critical_value(level: float) -> float:
    """z with P(|Z| <= z) = level."""
    if not 0.0 < level < 1.0:
        raise DomainError(f"confidence level must lie in (0, 1), got {level}")
    return float(special.ndtri(0.5 + level / 2.0))


def confidence_interval(s: PairedSample, w: WeightSpec, level: float = 0.95, method: str = "plugin",
                        seed: int = 0, B: int = 1000, sigma_sq: float | None = None) -> EstimateReport:
    """Normal interval estimate_simple +- z sigma_hat / sqrt(n).

    ``method`` is "plugin", "bootstrap", or "oracle" (then ``sigma_sq`` is required).
    """
    z = normal_critical_value(level)
    if s.n < 30:
        raise SampleTooSmallError(f"intervals need n >= 30, got {s.n}")
    if method == "plugin":
        vr = sigma_sq_plugin(s, w)
    elif method == "bootstrap":
        vr = bootstrap_variance(s, w, B=B, seed=seed)
    elif method == "oracle":
        if sigma_sq is None:
            raise DomainError("oracle intervals need sigma_sq")
        vr = VarianceReport(None, None, float(sigma_sq), integral(w), "oracle", 0, 0.0)
    else:
        raise DomainError(f"unknown variance method {method!r}")
    rep = estimate_simple(s, w)
    half = z * math.sqrt(vr.sigma_sq / s.n)
    rep.variance_estimate = vr.sigma_sq
    rep.ci = (rep.estimate - half, rep.estimate + half, level)
    rep.diagnostics.update({"variance_method": vr.method, "critical_value": z})
    return rep
