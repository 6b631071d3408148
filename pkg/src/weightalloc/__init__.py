"""Weighted premiums and capital allocations: concomitant-based estimators and their asymptotics."""
from ._kernels import BACKEND
from .asymptotics import (
    bootstrap_variance,
    confidence_interval,
    plugin_curves,
    sigma1_sq,
    sigma2_sq,
    sigma_sq_oracle,
    sigma_sq_plugin,
)
from .distributions import (
    BivariateGaussian,
    Exponential,
    GaussianCopula,
    Independent,
    LogNormal,
    Normal,
    Pareto,
    SelfRisk,
    Uniform01,
    sample_pairs,
    true_allocation,
    true_premium,
)
from .empirical import (
    PairedSample,
    concomitant_order,
    delta_hat,
    empirical_cdf_values,
    estimate_premium,
    estimate_ratio,
    estimate_simple,
)
from .weights import Constant, Indicator, ProportionalHazards, SGini, Tabulated, evaluate, grid_weights, integral

__version__ = "0.1.0"
