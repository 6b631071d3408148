"""Adaptive quadrature on (0, 1) with an endpoint-truncation divergence check.

The value comes from QUADPACK's QAGS (scipy.integrate.quad), which handles
integrable algebraic/log endpoint singularities through extrapolation and
never evaluates the integrand at the endpoints.  Partial integrals over
(eps, 1 - eps) for eps in TRUNCATION_SEQUENCE are recomputed alongside; if
they keep growing by more than 1% once eps < 1e-6 the integral is declared
divergent.
"""
import math
import warnings
from dataclasses import dataclass, field

import numpy as np
from scipy import integrate

from . import _config as cfg
from .errors import DivergenceError


@dataclass(frozen=True)
class QuadResult:
    value: float
    abserr: float
    partials: dict = field(default_factory=dict)
    warning: str | None = None


def integrate_interval(f, lo, hi, points=()):
    """One QAGS call on (lo, hi); returns (value, abserr, first warning line or None)."""
    pts = [p for p in points if lo < p < hi] or None
    with warnings.catch_warnings(record=True) as caught:
        warnings.simplefilter("always", integrate.IntegrationWarning)
        try:
            val, err = integrate.quad(
                f, lo, hi, points=pts, epsabs=cfg.QUAD_EPSABS, epsrel=cfg.QUAD_EPSREL, limit=cfg.QUAD_LIMIT
            )
        except (ZeroDivisionError, OverflowError) as exc:
            return math.inf, math.inf, f"integrand blew up: {exc}"
    msg = str(caught[-1].message).splitlines()[0] if caught else None
    return val, err, msg


def integrate_unit(f, points=(), check_divergence=True) -> QuadResult:
    """Integrate scalar ``f`` over (0, 1); ``points`` are known discontinuities."""
    points = sorted(float(p) for p in points)
    val, err, msg = integrate_interval(f, 0.0, 1.0, points)
    partials = {}
    if check_divergence:
        # grow the truncated integral sliver by sliver; a single QAGS call on
        # (eps, 1 - eps) would extrapolate straight past a near-singular cut
        seq = cfg.TRUNCATION_SEQUENCE
        prev, _, _ = integrate_interval(f, seq[0], 1.0 - seq[0], points)
        partials[seq[0]] = prev
        for outer, eps in zip(seq, seq[1:]):
            left, _, _ = integrate_interval(f, eps, outer, points)
            right, _, _ = integrate_interval(f, 1.0 - outer, 1.0 - eps, points)
            part = prev + left + right
            partials[eps] = part
            if eps < cfg.DIVERGENCE_START:
                scale = max(abs(prev), cfg.QUAD_EPSABS)
                if abs(part - prev) > cfg.DIVERGENCE_GROWTH * scale:
                    raise DivergenceError(
                        f"partial integrals still moving at truncation {eps:g}: {prev!r} -> {part!r}"
                    )
            prev = part
    if not np.isfinite(val):
        raise DivergenceError(f"quadrature returned {val!r}")
    return QuadResult(float(val), float(err), partials, msg)
