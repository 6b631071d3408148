"""One block per acceptance criterion, each at its stated tolerance.

Run with ``pytest tests/test_acceptance.py``; the terminal summary prints a
PASS/FAIL line per criterion (see conftest.py).
"""
import json
import math
import statistics
import sys
import time

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import MASTER_SEED
from weightalloc import cli
from weightalloc.asymptotics import bridge_variance, sigma2_sq, sigma_sq_oracle
from weightalloc.distributions import (
    BivariateGaussian,
    Exponential,
    GaussianCopula,
    Independent,
    LogNormal,
    Normal,
    SelfRisk,
)
from weightalloc.empirical import PairedSample, estimate_premium, estimate_ratio, estimate_simple
from weightalloc.montecarlo import ExperimentConfig, run_consistency, run_coverage, run_experiment, run_normality
from weightalloc._kernels import bridge_double_sum
from weightalloc.weights import Constant, Indicator, ProportionalHazards, check_lq, evaluate

EXP_SELF = SelfRisk(Exponential(1.0))
BVN = BivariateGaussian(0.0, 0.0, 1.0, 1.0, 0.5)
PAIRS = [
    ("self-exp/ind0.9", EXP_SELF, Indicator(0.9), 1.0 + math.log(10.0)),
    ("self-exp/ph0.8", EXP_SELF, ProportionalHazards(0.8), 1.25),
    ("bvn0.5/ind0.95", BVN, Indicator(0.95), 0.5 * math.exp(-0.5 * 1.6448536269514722**2) / math.sqrt(2 * math.pi) / 0.05),
]


def _true_value(capsys, model, weight):
    rc = cli.main(["true-value", "--model", json.dumps(model), "--weight", json.dumps(weight)])
    out = capsys.readouterr().out
    assert rc == 0
    return json.loads(out)


# --------------------------------------------------------------------------
# 1. oracle values
# --------------------------------------------------------------------------

@pytest.mark.criterion(1)
def test_oracle_values(capsys):
    t0 = time.perf_counter()
    self_exp = {"kind": "self", "marginal": {"kind": "exponential", "rate": 1.0}}

    r = _true_value(capsys, self_exp, {"kind": "indicator", "p": 0.9})
    assert r["quantity"] == "pi"
    assert r["value"] == pytest.approx(1.0 + math.log(10.0), rel=1e-4)
    assert r["sigma_sq"] == pytest.approx((1 + 0.9) / (1 - 0.9), rel=1e-3)

    for nu in (0.6, 0.8, 1.0, 2.0):
        r = _true_value(capsys, self_exp, {"kind": "ph", "nu": nu})
        assert r["value"] == pytest.approx(1.0 / nu, rel=1e-4)

    bvn = {"kind": "bvn", "muX": 0, "muY": 0, "sigmaX": 1, "sigmaY": 1, "rho": 0.5}
    r = _true_value(capsys, bvn, {"kind": "indicator", "p": 0.95})
    assert r["quantity"] == "Pi"
    assert r["value"] == pytest.approx(1.0314, rel=1e-3)

    assert time.perf_counter() - t0 < 5.0


# --------------------------------------------------------------------------
# 2. consistency
# --------------------------------------------------------------------------

@pytest.mark.criterion(2)
def test_consistency():
    t0 = time.perf_counter()
    for label, model, weight, truth in PAIRS:
        for estimator in ("simple", "ratio"):
            c = ExperimentConfig(model, weight, (1000, 4000, 16000), 500, MASTER_SEED, estimator=estimator)
            res = run_consistency(c)
            assert res.true_value == pytest.approx(truth, rel=1e-4), label
            rows = res.rows
            assert all(r.failures == 0 for r in rows), label
            assert abs(rows[-1].bias) < 0.02 * abs(res.true_value), (label, estimator, rows[-1].bias)
            for a, b in zip(rows, rows[1:]):
                ratio = a.rmse / b.rmse
                assert 1.7 <= ratio <= 2.3, (label, estimator, a.n, ratio)
    assert time.perf_counter() - t0 < 180.0


# --------------------------------------------------------------------------
# 3. asymptotic normality
# --------------------------------------------------------------------------

@pytest.mark.criterion(3)
def test_normality():
    t0 = time.perf_counter()
    c = ExperimentConfig(EXP_SELF, Indicator(0.9), (10_000,), 1000, MASTER_SEED, experiment="normality")
    row = run_normality(c).rows[0]
    assert row.ks_statistic < 0.055
    assert abs(row.scaled_variance - 19.0) <= 0.1 * 19.0
    assert time.perf_counter() - t0 < 180.0


# --------------------------------------------------------------------------
# 4. coverage
# --------------------------------------------------------------------------

@pytest.mark.criterion(4)
@pytest.mark.parametrize("method, band", [("oracle", (0.93, 0.97)), ("plugin", (0.91, 0.98))])
def test_coverage(method, band):
    t0 = time.perf_counter()
    c = ExperimentConfig(EXP_SELF, Indicator(0.9), (10_000,), 1000, MASTER_SEED, experiment="coverage",
                         ci_level=0.95, variance_method=method)
    row = run_coverage(c).rows[0]
    assert band[0] <= row.coverage <= band[1]
    assert time.perf_counter() - t0 < 300.0 / 2


# --------------------------------------------------------------------------
# 5. exact small-sample identities
# --------------------------------------------------------------------------

@pytest.mark.criterion(5)
def test_small_sample_identities():
    s = PairedSample([1.0, 3.0, 2.0], [10.0, 30.0, 20.0])
    assert estimate_ratio(s, Indicator(0.5)).estimate == 3.0
    assert estimate_simple(s, Indicator(0.5)).estimate == 2.0
    assert estimate_premium([2.0, 1.0, 3.0], Indicator(0.5)).estimate == 2.0


@pytest.mark.criterion(5)
@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=60), st.randoms(use_true_random=False))
def test_constant_weight_gives_mean_bit_exactly(xs, rnd):
    ys = list(range(len(xs)))
    rnd.shuffle(ys)
    s = PairedSample(xs, ys)
    mean = statistics.fmean(xs)
    w = Constant(1.0)
    assert estimate_ratio(s, w).estimate == mean
    assert estimate_simple(s, w).estimate == mean
    assert estimate_premium(xs, w).estimate == mean


@pytest.mark.criterion(5)
@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e6, 1e6, allow_nan=False), min_size=1, max_size=60),
       st.sampled_from([Indicator(0.5), Indicator(0.9), ProportionalHazards(0.8), ProportionalHazards(2.0),
                        Constant(3.0)]))
def test_self_risk_simple_equals_premium(xs, w):
    assert estimate_simple(PairedSample.self_risk(xs), w).estimate == estimate_premium(xs, w).estimate


# --------------------------------------------------------------------------
# 6. property suite
# --------------------------------------------------------------------------

distinct_pairs = st.integers(2, 50).flatmap(
    lambda n: st.tuples(
        st.lists(st.floats(-1e3, 1e3, allow_nan=False), min_size=n, max_size=n),
        st.lists(st.integers(-1000, 1000), min_size=n, max_size=n, unique=True),
    )
)
some_weights = st.sampled_from([Indicator(0.5), Indicator(0.7), ProportionalHazards(0.8), ProportionalHazards(3.0),
                                Constant(1.0)])


@pytest.mark.criterion(6)
@settings(max_examples=200, deadline=None)
@given(distinct_pairs, some_weights)
def test_rank_invariance(pair, w):
    xs, ys = pair
    ys = np.array(ys, dtype=float)
    a = PairedSample(xs, ys)
    b = PairedSample(xs, np.exp(ys / 100.0))  # stays strictly increasing in floating point on this range
    if np.any(evaluate(w, (np.arange(len(xs)) + 1.0) / (len(xs) + 1)) != 0):
        assert estimate_ratio(a, w).estimate == estimate_ratio(b, w).estimate
    assert estimate_simple(a, w).estimate == estimate_simple(b, w).estimate


@pytest.mark.criterion(6)
@settings(max_examples=200, deadline=None)
@given(distinct_pairs, some_weights, st.floats(0.1, 10), st.floats(-100, 100))
def test_affine_equivariance_in_x(pair, w, a, b):
    xs, ys = np.array(pair[0]), pair[1]
    n = len(xs)
    s, t = PairedSample(xs, ys), PairedSample(a * xs + b, ys)
    scale = max(1.0, float(np.max(np.abs(a * xs))) + abs(b))
    if np.any(evaluate(w, np.arange(1, n + 1) / (n + 1)) != 0):
        assert estimate_ratio(t, w).estimate == pytest.approx(a * estimate_ratio(s, w).estimate + b,
                                                               abs=1e-9 * scale)
    # the simple estimator normalises by the integral of w, not by the grid sum,
    # so a constant shift b comes back scaled by mean(w(k/(n+1))) / int w
    shift = estimate_simple(PairedSample(np.ones(n), ys), w).estimate
    assert estimate_simple(t, w).estimate == pytest.approx(a * estimate_simple(s, w).estimate + b * shift,
                                                           abs=1e-9 * scale * max(1.0, abs(shift)))


g_increments = st.lists(st.floats(0.0, 5.0), min_size=4, max_size=80)


@pytest.mark.criterion(6)
@settings(max_examples=200, deadline=None)
@given(g_increments, st.floats(-1e3, 1e3), some_weights)
def test_sigma2_nonnegative_and_shift_invariant(incs, c, w):
    nodes = np.linspace(0.01, 0.99, len(incs) + 1)
    g = np.concatenate(([0.0], np.cumsum(incs)))
    mid = 0.5 * (nodes[1:] + nodes[:-1])
    wm = evaluate(w, mid)
    base = bridge_variance(nodes, g, wm)
    assert base >= -1e-12
    assert bridge_variance(nodes, g + c, wm) == pytest.approx(base, rel=1e-9, abs=1e-12)


@pytest.mark.criterion(6)
def test_sigma2_uniform_identity_against_brute_force():
    value = sigma2_sq(lambda t: t, Constant(1.0))
    n = 2000
    mids = (np.arange(n) + 0.5) / n
    brute = bridge_double_sum(mids, np.full(n, 1.0 / n))
    assert brute == pytest.approx(1 / 12, rel=1e-3)
    assert value == pytest.approx(1 / 12, rel=1e-3)
    assert value == pytest.approx(brute, rel=1e-3)


@pytest.mark.criterion(6)
@pytest.mark.parametrize("model, w", [
    (EXP_SELF, Indicator(0.5)),
    (EXP_SELF, Indicator(0.9)),
    (EXP_SELF, Indicator(0.95)),
    (EXP_SELF, ProportionalHazards(0.8)),
    (EXP_SELF, ProportionalHazards(2.0)),
    (BVN, Indicator(0.95)),
    (BVN, Constant(1.0)),
    (SelfRisk(Normal(0.0, 1.0)), ProportionalHazards(0.7)),
    (SelfRisk(LogNormal(0.0, 0.5)), Indicator(0.9)),
    (Independent(Exponential(2.0), Exponential(1.0)), Indicator(0.8)),
    (GaussianCopula(Exponential(1.0), LogNormal(0.0, 1.0), 0.6), Indicator(0.9)),
])
def test_grid_doubling_stability(model, w):
    a = sigma_sq_oracle(model, w, grid_size=4096)
    b = sigma_sq_oracle(model, w, grid_size=8192)
    for x, y in ((a.sigma1_sq, b.sigma1_sq), (a.sigma2_sq, b.sigma2_sq)):
        assert abs(x - y) <= 1e-3 * max(abs(x), abs(y)) or max(abs(x), abs(y)) < 1e-14


@pytest.mark.criterion(6)
@pytest.mark.parametrize("nu", [0.2, 0.3, 0.4, 0.45, 0.49, 0.51, 0.55, 0.6, 0.8, 1.0, 1.5, 2.0, 5.0])
def test_lq_threshold(nu):
    assert check_lq(ProportionalHazards(nu), q=2, power=1).finite is (nu > 0.5)


@pytest.mark.criterion(6)
@pytest.mark.parametrize("experiment, method", [("consistency", "oracle"), ("normality", "oracle"),
                                                ("coverage", "plugin"), ("coverage", "bootstrap")])
def test_experiment_determinism(experiment, method):
    c = ExperimentConfig(BVN, Indicator(0.9), (200, 400), 40, MASTER_SEED, experiment=experiment,
                         variance_method=method, bootstrap_B=50)
    first = run_experiment(c).to_json()
    assert run_experiment(c).to_json() == first
    parallel = ExperimentConfig.from_dict({**c.to_dict(), "workers": 4})
    assert run_experiment(parallel).to_dict()["rows"] == json.loads(first)["rows"]


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-q"]))
