"""Parametric joint models for (X, Y) and quadrature values of the true functionals.

Each model supplies a seeded sampler, the quantile-regression curve
t -> E[X | Y = F_Y^{-1}(t)] and the conditional-variance curve
t -> Var[X | Y = F_Y^{-1}(t)].  Because F_Y is continuous for every model
here, F_Y(Y) is uniform and the true allocation is a one-dimensional
integral over (0, 1).
"""
from __future__ import annotations

import json
import math
import warnings
from dataclasses import dataclass
from typing import ClassVar

import numpy as np
from scipy import special

from . import _config as cfg
from ._quad import integrate_unit
from ._rng import generator
from .empirical import PairedSample
from .errors import DomainError, InvalidSpecError, UnsupportedModelError, ZeroDenominatorError
from .weights import WeightSpec, evaluate, integral

__all__ = [
    "InferenceUnsafeWarning",
    "MarginalSpec",
    "Exponential",
    "Pareto",
    "LogNormal",
    "Uniform01",
    "Normal",
    "ModelSpec",
    "SelfRisk",
    "BivariateGaussian",
    "GaussianCopula",
    "Independent",
    "quantile",
    "sample_pairs",
    "regression_curve",
    "conditional_variance_curve",
    "true_allocation",
    "true_premium",
    "marginal_to_dict",
    "marginal_from_dict",
    "model_to_dict",
    "model_from_dict",
    "model_from_json",
]


class InferenceUnsafeWarning(UserWarning):
    """Marginal has an infinite second moment; only consistency results apply."""


def _check_t(t):
    arr = np.asarray(t, dtype=np.float64)
    if not np.all((arr > 0.0) & (arr < 1.0)):
        raise DomainError("quantile level must lie strictly inside (0, 1)")
    return arr


def _scalar_or_array(arr, like):
    return float(arr) if np.ndim(like) == 0 else arr


# --------------------------------------------------------------------------
# marginals
# --------------------------------------------------------------------------

@dataclass(frozen=True)
class MarginalSpec:
    kind: ClassVar[str] = ""

    def quantile(self, t):
        arr = _check_t(t)
        return _scalar_or_array(self._ppf(arr), t)

    def from_normal(self, z):
        """F^{-1}(Phi(z)), evaluated without losing the tails."""
        return self._ppf(special.ndtr(z))

    @property
    def inference_safe(self) -> bool:
        return math.isfinite(self.variance)


@dataclass(frozen=True)
class Exponential(MarginalSpec):
    rate: float = 1.0
    kind: ClassVar[str] = "exponential"

    def __post_init__(self):
        if not self.rate > 0:
            raise InvalidSpecError("exponential rate must be positive")

    def _ppf(self, t):
        return -np.log1p(-t) / self.rate

    def from_normal(self, z):
        # -log(1 - Phi(z)) = -log Phi(-z)
        return -special.log_ndtr(-np.asarray(z)) / self.rate

    @property
    def mean(self):
        return 1.0 / self.rate

    @property
    def variance(self):
        return 1.0 / self.rate**2


@dataclass(frozen=True)
class Pareto(MarginalSpec):
    """Pareto type I: P(X > x) = (scale / x)^shape for x >= scale."""

    shape: float
    scale: float = 1.0
    kind: ClassVar[str] = "pareto"

    def __post_init__(self):
        if not (self.shape > 0 and self.scale > 0):
            raise InvalidSpecError("pareto shape and scale must be positive")
        if self.shape <= 2:
            warnings.warn(
                f"Pareto(shape={self.shape}) has infinite variance; asymptotic inference is unavailable",
                InferenceUnsafeWarning,
                stacklevel=3,
            )

    def _ppf(self, t):
        return self.scale * np.power(1.0 - t, -1.0 / self.shape)

    def from_normal(self, z):
        return self.scale * np.exp(-special.log_ndtr(-np.asarray(z)) / self.shape)

    @property
    def mean(self):
        a = self.shape
        return a * self.scale / (a - 1.0) if a > 1 else math.inf

    @property
    def variance(self):
        a = self.shape
        if a <= 2:
            return math.inf
        return self.scale**2 * a / ((a - 1.0) ** 2 * (a - 2.0))


@dataclass(frozen=True)
class LogNormal(MarginalSpec):
    mu: float = 0.0
    sigma: float = 1.0
    kind: ClassVar[str] = "lognormal"

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidSpecError("lognormal sigma must be positive")

    def _ppf(self, t):
        return np.exp(self.mu + self.sigma * special.ndtri(t))

    def from_normal(self, z):
        return np.exp(self.mu + self.sigma * np.asarray(z))

    @property
    def mean(self):
        return math.exp(self.mu + self.sigma**2 / 2)

    @property
    def variance(self):
        s2 = self.sigma**2
        return math.expm1(s2) * math.exp(2 * self.mu + s2)


@dataclass(frozen=True)
class Uniform01(MarginalSpec):
    kind: ClassVar[str] = "uniform"

    def _ppf(self, t):
        return np.asarray(t, dtype=np.float64) * 1.0

    mean = 0.5
    variance = 1.0 / 12.0


@dataclass(frozen=True)
class Normal(MarginalSpec):
    mu: float = 0.0
    sigma: float = 1.0
    kind: ClassVar[str] = "normal"

    def __post_init__(self):
        if not self.sigma > 0:
            raise InvalidSpecError("normal sigma must be positive")

    def _ppf(self, t):
        return self.mu + self.sigma * special.ndtri(t)

    def from_normal(self, z):
        return self.mu + self.sigma * np.asarray(z)

    @property
    def mean(self):
        return self.mu

    @property
    def variance(self):
        return self.sigma**2


def quantile(m: MarginalSpec, t):
    return m.quantile(t)


# --------------------------------------------------------------------------
# joint models
# --------------------------------------------------------------------------

_GH_NODES, _GH_WEIGHTS = np.polynomial.hermite_e.hermegauss(cfg.GAUSS_HERMITE_NODES)
_GH_WEIGHTS = _GH_WEIGHTS / math.sqrt(2.0 * math.pi)


def _check_rho(rho):
    if not -1.0 < rho < 1.0:
        raise InvalidSpecError(f"rho={rho!r} must lie strictly inside (-1, 1)")


@dataclass(frozen=True)
class ModelSpec:
    kind: ClassVar[str] = ""

    def _normals(self, n, seed):
        rng = generator(seed)
        z1 = rng.standard_normal(n)
        z2 = rng.standard_normal(n)
        return z1, z2

    def sample(self, n: int, seed: int) -> PairedSample:
        if n < 1:
            raise DomainError("sample size must be positive")
        xs, ys = self._draw(int(n), seed)
        return PairedSample(xs, ys)

    def regression_curve(self, t):
        raise UnsupportedModelError(f"{type(self).__name__} has no regression curve")

    def conditional_variance_curve(self, t):
        raise UnsupportedModelError(f"{type(self).__name__} has no conditional variance curve")

    @property
    def inference_safe(self) -> bool:
        return math.isfinite(self.variance_x)

    @property
    def is_self_risk(self) -> bool:
        return False


@dataclass(frozen=True)
class SelfRisk(ModelSpec):
    """Y = X."""

    marginal: MarginalSpec
    kind: ClassVar[str] = "self"

    def _draw(self, n, seed):
        z = generator(seed).standard_normal(n)
        x = self.marginal.from_normal(z)
        return x, x

    def regression_curve(self, t):
        return self.marginal.quantile(t)

    def conditional_variance_curve(self, t):
        arr = _check_t(t)
        return _scalar_or_array(np.zeros_like(arr), t)

    @property
    def mean_x(self):
        return self.marginal.mean

    @property
    def variance_x(self):
        return self.marginal.variance

    @property
    def is_self_risk(self):
        return True


@dataclass(frozen=True)
class BivariateGaussian(ModelSpec):
    mu_x: float = 0.0
    mu_y: float = 0.0
    sigma_x: float = 1.0
    sigma_y: float = 1.0
    rho: float = 0.0
    kind: ClassVar[str] = "bvn"

    def __post_init__(self):
        _check_rho(self.rho)
        if not (self.sigma_x > 0 and self.sigma_y > 0):
            raise InvalidSpecError("standard deviations must be positive")

    def _draw(self, n, seed):
        z1, z2 = self._normals(n, seed)
        y = self.mu_y + self.sigma_y * z2
        x = self.mu_x + self.sigma_x * (self.rho * z2 + math.sqrt(1.0 - self.rho**2) * z1)
        return x, y

    def regression_curve(self, t):
        arr = _check_t(t)
        return _scalar_or_array(self.mu_x + self.rho * self.sigma_x * special.ndtri(arr), t)

    def conditional_variance_curve(self, t):
        arr = _check_t(t)
        return _scalar_or_array(np.full_like(arr, self.sigma_x**2 * (1.0 - self.rho**2)), t)

    @property
    def mean_x(self):
        return self.mu_x

    @property
    def variance_x(self):
        return self.sigma_x**2


@dataclass(frozen=True)
class GaussianCopula(ModelSpec):
    marginal_x: MarginalSpec
    marginal_y: MarginalSpec
    rho: float = 0.0
    kind: ClassVar[str] = "gaussian_copula"

    def __post_init__(self):
        _check_rho(self.rho)

    def _draw(self, n, seed):
        z1, z2 = self._normals(n, seed)
        y = self.marginal_y.from_normal(z2)
        x = self.marginal_x.from_normal(self.rho * z2 + math.sqrt(1.0 - self.rho**2) * z1)
        return x, y

    def _conditional_moments(self, t):
        # Z1 | Z2 = z ~ N(rho z, 1 - rho^2); 64-node Gauss-Hermite over Z1
        arr = _check_t(t)
        z = special.ndtri(np.atleast_1d(arr))[:, None]
        pts = self.rho * z + math.sqrt(1.0 - self.rho**2) * _GH_NODES[None, :]
        h = self.marginal_x.from_normal(pts)
        m1 = h @ _GH_WEIGHTS
        m2 = (h * h) @ _GH_WEIGHTS
        return arr, m1, np.maximum(m2 - m1 * m1, 0.0)

    def regression_curve(self, t):
        arr, m1, _ = self._conditional_moments(t)
        return _scalar_or_array(m1[0] if arr.ndim == 0 else m1.reshape(arr.shape), t)

    def conditional_variance_curve(self, t):
        arr, _, v = self._conditional_moments(t)
        return _scalar_or_array(v[0] if arr.ndim == 0 else v.reshape(arr.shape), t)

    @property
    def mean_x(self):
        return self.marginal_x.mean

    @property
    def variance_x(self):
        return self.marginal_x.variance


@dataclass(frozen=True)
class Independent(ModelSpec):
    marginal_x: MarginalSpec
    marginal_y: MarginalSpec
    kind: ClassVar[str] = "independent"

    def _draw(self, n, seed):
        z1, z2 = self._normals(n, seed)
        return self.marginal_x.from_normal(z1), self.marginal_y.from_normal(z2)

    def regression_curve(self, t):
        arr = _check_t(t)
        return _scalar_or_array(np.full_like(arr, self.marginal_x.mean), t)

    def conditional_variance_curve(self, t):
        arr = _check_t(t)
        return _scalar_or_array(np.full_like(arr, self.marginal_x.variance), t)

    @property
    def mean_x(self):
        return self.marginal_x.mean

    @property
    def variance_x(self):
        return self.marginal_x.variance


def sample_pairs(model: ModelSpec, n: int, seed: int) -> PairedSample:
    """n i.i.d. pairs from ``model``; bit-reproducible for a given seed."""
    return model.sample(n, seed)


def regression_curve(model: ModelSpec, t):
    return model.regression_curve(t)


def conditional_variance_curve(model: ModelSpec, t):
    return model.conditional_variance_curve(t)


def _weighted_mean(curve, w: WeightSpec) -> float:
    total = integral(w)
    if total == 0.0:
        raise ZeroDenominatorError("weight integrates to zero")

    def f(t):
        return float(curve(t)) * evaluate(w, t)

    return integrate_unit(f, points=w.breakpoints).value / total


def true_allocation(model: ModelSpec, w: WeightSpec) -> float:
    """E[X w(F_Y(Y))] / E[w(F_Y(Y))] = int g(t) w(t) dt / int w."""
    return _weighted_mean(model.regression_curve, w)


def true_premium(m: MarginalSpec, w: WeightSpec) -> float:
    """int F_X^{-1}(t) w(t) dt / int w."""
    return _weighted_mean(m.quantile, w)


# --------------------------------------------------------------------------
# JSON
# --------------------------------------------------------------------------

_MARGINALS = {
    "exponential": (Exponential, ("rate",)),
    "pareto": (Pareto, ("shape", "scale")),
    "lognormal": (LogNormal, ("mu", "sigma")),
    "uniform": (Uniform01, ()),
    "normal": (Normal, ("mu", "sigma")),
}


def marginal_to_dict(m: MarginalSpec) -> dict:
    _, names = _MARGINALS[m.kind]
    return {"kind": m.kind, **{k: getattr(m, k) for k in names}}


def marginal_from_dict(d) -> MarginalSpec:
    if not isinstance(d, dict) or d.get("kind") not in _MARGINALS:
        raise InvalidSpecError(f"unknown marginal spec {d!r}")
    cls, names = _MARGINALS[d["kind"]]
    try:
        return cls(**{k: float(d[k]) for k in names if k in d})
    except (TypeError, ValueError) as exc:
        raise InvalidSpecError(f"bad marginal spec {d!r}: {exc}") from None


_BVN_FIELDS = {"muX": "mu_x", "muY": "mu_y", "sigmaX": "sigma_x", "sigmaY": "sigma_y", "rho": "rho"}


def model_to_dict(model: ModelSpec) -> dict:
    if isinstance(model, SelfRisk):
        return {"kind": "self", "marginal": marginal_to_dict(model.marginal)}
    if isinstance(model, BivariateGaussian):
        return {"kind": "bvn", **{k: getattr(model, a) for k, a in _BVN_FIELDS.items()}}
    if isinstance(model, GaussianCopula):
        return {
            "kind": "gaussian_copula",
            "marginalX": marginal_to_dict(model.marginal_x),
            "marginalY": marginal_to_dict(model.marginal_y),
            "rho": model.rho,
        }
    if isinstance(model, Independent):
        return {
            "kind": "independent",
            "marginalX": marginal_to_dict(model.marginal_x),
            "marginalY": marginal_to_dict(model.marginal_y),
        }
    raise InvalidSpecError(f"cannot serialise {type(model).__name__}")


def model_from_dict(d) -> ModelSpec:
    if not isinstance(d, dict) or "kind" not in d:
        raise InvalidSpecError(f"model spec must be an object with a 'kind': {d!r}")
    kind = d["kind"]
    try:
        if kind == "self":
            return SelfRisk(marginal_from_dict(d["marginal"]))
        if kind == "bvn":
            return BivariateGaussian(**{a: float(d[k]) for k, a in _BVN_FIELDS.items() if k in d})
        if kind == "gaussian_copula":
            return GaussianCopula(
                marginal_from_dict(d["marginalX"]), marginal_from_dict(d["marginalY"]), float(d["rho"])
            )
        if kind == "independent":
            return Independent(marginal_from_dict(d["marginalX"]), marginal_from_dict(d["marginalY"]))
    except KeyError as exc:
        raise InvalidSpecError(f"model kind {kind!r} is missing field {exc}") from None
    except (TypeError, ValueError) as exc:
        if isinstance(exc, InvalidSpecError):
            raise
        raise InvalidSpecError(f"bad model spec {d!r}: {exc}") from None
    raise InvalidSpecError(f"unknown model kind {kind!r}")


def model_from_json(text: str) -> ModelSpec:
    try:
        return model_from_dict(json.loads(text))
    except json.JSONDecodeError as exc:
        raise InvalidSpecError(f"model JSON does not parse: {exc}") from None
