"""Seeded Monte Carlo experiments: consistency, asymptotic normality, coverage.

Replication r at sample size n draws from the stream keyed by
``derive_seed(master_seed, n, r)``; rows are folded in replication order,
so results are bit-identical across runs and worker counts.

Simulation cannot tell almost-sure from in-probability convergence; these
experiments check the in-probability and in-law consequences only.
"""
from __future__ import annotations

import csv
import json
import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import special

from . import _config as cfg
from ._kernels import exact_dot, ks_sorted
from ._rng import derive_seed
from .asymptotics import bootstrap_variance, normal_critical_value, sigma_sq_oracle, sigma_sq_plugin
from .distributions import (
    BivariateGaussian,
    ModelSpec,
    Normal,
    SelfRisk,
    model_from_dict,
    model_to_dict,
    true_allocation,
)
from .empirical import _delta, estimate_ratio
from .errors import DomainError, ExperimentAbort, InvalidSpecError, WeightAllocError, ZeroVarianceError
from .weights import WeightSpec, grid_weights, integral, weight_from_dict, weight_to_dict

__all__ = [
    "ExperimentConfig",
    "ResultRow",
    "ExperimentResult",
    "ks_statistic",
    "run_consistency",
    "run_normality",
    "run_coverage",
    "run_experiment",
    "load_config",
]

EXPERIMENTS = ("consistency", "normality", "coverage")
ESTIMATORS = ("ratio", "simple", "premium")
VARIANCE_METHODS = ("oracle", "plugin", "bootstrap")
CSV_HEADER = ("n", "mean", "bias", "rmse", "scaled_var", "ks", "coverage")


@dataclass(frozen=True)
class ExperimentConfig:
    model: ModelSpec
    weight: WeightSpec
    sample_sizes: tuple[int, ...]
    replications: int
    master_seed: int = 0
    experiment: str = "consistency"
    estimator: str = "simple"
    ci_level: float = 0.95
    variance_method: str = "oracle"
    output_path: str = "results"
    bootstrap_B: int = 200
    workers: int = 1
    grid_size: int = cfg.DEFAULT_GRID_SIZE
    truncation: float = cfg.DEFAULT_TRUNCATION

    def __post_init__(self):
        sizes = tuple(int(n) for n in self.sample_sizes)
        object.__setattr__(self, "sample_sizes", sizes)
        if not sizes or sizes[0] < 1 or any(b <= a for a, b in zip(sizes, sizes[1:])):
            raise InvalidSpecError(f"sample_sizes must be positive and strictly increasing: {sizes}")
        if self.replications < 1:
            raise InvalidSpecError("replications must be at least 1")
        if not 0.0 < self.ci_level < 1.0:
            raise InvalidSpecError("ci_level must lie in (0, 1)")
        if self.experiment not in EXPERIMENTS:
            raise InvalidSpecError(f"experiment must be one of {EXPERIMENTS}")
        if self.estimator not in ESTIMATORS:
            raise InvalidSpecError(f"estimator must be one of {ESTIMATORS}")
        if self.variance_method not in VARIANCE_METHODS:
            raise InvalidSpecError(f"variance_method must be one of {VARIANCE_METHODS}")

    def to_dict(self) -> dict:
        d = {k: getattr(self, k) for k in self.__dataclass_fields__}
        d["model"] = model_to_dict(self.model)
        d["weight"] = weight_to_dict(self.weight)
        d["sample_sizes"] = list(self.sample_sizes)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> ExperimentConfig:
        if not isinstance(d, dict):
            raise InvalidSpecError("experiment config must be a JSON object")
        unknown = set(d) - set(cls.__dataclass_fields__)
        if unknown:
            raise InvalidSpecError(f"unknown config keys: {sorted(unknown)}")
        try:
            kw = dict(d)
            kw["model"] = model_from_dict(d["model"])
            kw["weight"] = weight_from_dict(d["weight"])
            return cls(**kw)
        except KeyError as exc:
            raise InvalidSpecError(f"config is missing {exc}") from None
        except TypeError as exc:
            raise InvalidSpecError(f"bad config: {exc}") from None


def load_config(path) -> ExperimentConfig:
    try:
        with open(path) as fh:
            return ExperimentConfig.from_dict(json.load(fh))
    except json.JSONDecodeError as exc:
        raise InvalidSpecError(f"config JSON does not parse: {exc}") from None
    except OSError as exc:
        raise InvalidSpecError(f"cannot read config: {exc}") from None


@dataclass
class ResultRow:
    n: int
    mean_estimate: float
    bias: float
    rmse: float
    variance: float
    scaled_variance: float
    ks_statistic: float | None = None
    coverage: float | None = None
    failures: int = 0
    replications_used: int = 0


@dataclass
class ExperimentResult:
    experiment: str
    true_value: float
    rows: list[ResultRow]
    oracle_sigma_sq: float | None = None
    config: dict = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "experiment": self.experiment,
            "true_value": self.true_value,
            "oracle_sigma_sq": self.oracle_sigma_sq,
            "rows": [asdict(r) for r in self.rows],
            "config": self.config,
            "notes": list(self.notes),
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), indent=2, allow_nan=True)

    def csv_rows(self):
        for r in self.rows:
            yield (r.n, r.mean_estimate, r.bias, r.rmse, r.scaled_variance, r.ks_statistic, r.coverage)

    def write(self, directory) -> tuple[str, str]:
        """Write ``<experiment>.json`` and ``<experiment>.csv`` into ``directory`` (created if missing)."""
        os.makedirs(directory, exist_ok=True)
        jpath = os.path.join(directory, f"{self.experiment}.json")
        cpath = os.path.join(directory, f"{self.experiment}.csv")
        with open(jpath, "w") as fh:
            fh.write(self.to_json() + "\n")
        with open(cpath, "w", newline="") as fh:
            out = csv.writer(fh, lineterminator="\n")
            out.writerow(CSV_HEADER)
            for row in self.csv_rows():
                out.writerow(["" if v is None else repr(v) for v in row])
        return jpath, cpath


def ks_statistic(zs) -> float:
    """sup_x |F_n(x) - Phi(x)|, evaluated on both sides of every jump."""
    z = np.sort(np.asarray(zs, dtype=np.float64))
    if z.size == 0:
        raise DomainError("KS statistic of an empty sample")
    return ks_sorted(special.ndtr(z))


# --------------------------------------------------------------------------
# machinery
# --------------------------------------------------------------------------

def _x_marginal_model(model):
    if isinstance(model, SelfRisk):
        return model
    if isinstance(model, BivariateGaussian):
        return SelfRisk(Normal(model.mu_x, model.sigma_x))
    return SelfRisk(model.marginal_x)


def _target_model(c: ExperimentConfig):
    # the premium estimator targets pi_w of X alone
    return _x_marginal_model(c.model) if c.estimator == "premium" else c.model


def _estimator(c: ExperimentConfig, n: int):
    w = c.weight
    if c.estimator == "ratio":
        return lambda s: estimate_ratio(s, w).estimate
    gw = grid_weights(w, n)
    total = integral(w)
    if c.estimator == "premium":
        return lambda s: exact_dot(np.sort(s.xs), gw) / n / total
    return lambda s: _delta(s.xs, s.ys, gw) / total


def _replicate(c: ExperimentConfig, n: int, one):
    """Run ``one(sample, r)`` for every replication; returns an array with nan for failures."""

    def task(r):
        s = c.model.sample(n, derive_seed(c.master_seed, n, r))
        try:
            return one(s, r)
        except WeightAllocError:
            return None

    if c.workers > 1:
        with ThreadPoolExecutor(c.workers) as pool:
            out = list(pool.map(task, range(c.replications)))
    else:
        out = [task(r) for r in range(c.replications)]
    failures = sum(v is None for v in out)
    if failures > cfg.MAX_FAILURE_FRACTION * c.replications:
        raise ExperimentAbort(f"{failures} of {c.replications} replications failed at n={n}")
    return out, failures


def _summary(n, est, truth, failures):
    est = np.asarray(est, dtype=np.float64)
    if est.size == 0:
        nan = math.nan
        return ResultRow(n, nan, nan, nan, nan, nan, failures=failures)
    mean = float(np.mean(est))
    var = float(np.mean((est - mean) ** 2))
    rmse = math.sqrt(float(np.mean((est - truth) ** 2)))
    return ResultRow(n, mean, mean - truth, rmse, var, n * var, failures=failures, replications_used=int(est.size))


def _result(c, kind, truth, rows, sigma_sq=None):
    notes = ["convergence checked in probability / in law only; almost-sure convergence is not testable"]
    if c.replications == 1:
        notes.append("statistics degenerate: a single replication per sample size")
    return ExperimentResult(kind, truth, rows, sigma_sq, c.to_dict(), notes)


def _oracle_sigma_sq(c):
    return sigma_sq_oracle(_target_model(c), c.weight, c.grid_size, c.truncation).sigma_sq


# --------------------------------------------------------------------------
# experiments
# --------------------------------------------------------------------------

def run_consistency(c: ExperimentConfig) -> ExperimentResult:
    """Bias and RMSE against the quadrature value at every sample size."""
    truth = true_allocation(_target_model(c), c.weight)
    rows = []
    for n in c.sample_sizes:
        est_fn = _estimator(c, n)
        out, failures = _replicate(c, n, lambda s, r: est_fn(s))
        rows.append(_summary(n, [v for v in out if v is not None], truth, failures))
    return _result(c, "consistency", truth, rows)


def run_normality(c: ExperimentConfig) -> ExperimentResult:
    """KS distance between sqrt(n)(estimate - truth)/sigma and N(0, 1)."""
    truth = true_allocation(_target_model(c), c.weight)
    sigma_sq = _oracle_sigma_sq(c)
    if not sigma_sq > 0.0:
        raise ZeroVarianceError("oracle asymptotic variance is zero; standardised estimates are undefined")
    sigma = math.sqrt(sigma_sq)
    rows = []
    for n in c.sample_sizes:
        est_fn = _estimator(c, n)
        out, failures = _replicate(c, n, lambda s, r: est_fn(s))
        est = np.array([v for v in out if v is not None])
        row = _summary(n, est, truth, failures)
        if est.size:
            row.ks_statistic = ks_statistic(math.sqrt(n) * (est - truth) / sigma)
        rows.append(row)
    return _result(c, "normality", truth, rows, sigma_sq)


def run_coverage(c: ExperimentConfig) -> ExperimentResult:
    """Fraction of normal intervals around the simple estimator that contain the true value."""
    target = _target_model(c)
    truth = true_allocation(target, c.weight)
    z = normal_critical_value(c.ci_level)
    sigma_sq = _oracle_sigma_sq(c) if c.variance_method == "oracle" else None
    rows = []
    for n in c.sample_sizes:
        gw = grid_weights(c.weight, n)
        total = integral(c.weight)

        def one(s, r):
            if c.estimator == "premium":
                s = type(s).self_risk(s.xs)
            est = _delta(s.xs, s.ys, gw) / total
            if c.variance_method == "oracle":
                v = sigma_sq
            elif c.variance_method == "plugin":
                v = sigma_sq_plugin(s, c.weight).sigma_sq
            else:
                v = bootstrap_variance(s, c.weight, c.bootstrap_B, derive_seed(c.master_seed, n, r, 1)).sigma_sq
            half = z * math.sqrt(v / n)
            return est, (est - half <= truth <= est + half)

        out, failures = _replicate(c, n, one)
        ok = [v for v in out if v is not None]
        row = _summary(n, [e for e, _ in ok], truth, failures)
        row.coverage = float(np.mean([hit for _, hit in ok])) if ok else math.nan
        rows.append(row)
    return _result(c, "coverage", truth, rows, sigma_sq)


def run_experiment(c: ExperimentConfig) -> ExperimentResult:
    return {"consistency": run_consistency, "normality": run_normality, "coverage": run_coverage}[c.experiment](c)
