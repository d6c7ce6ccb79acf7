"""Conditional (regression-residual) and joint (Mahalanobis) scorers.

The conditional scorer's recursion is checked against a brute-force oracle
that re-solves the exponentially weighted ridge normal equations

    theta_k = argmin  sum_s lam^(k-s) (y_s - a_s.theta)^2 + lam^k * ridge * |theta|^2

from scratch at every step.  The recursion and the solve are different
arithmetic routes to the same estimate, so agreement is to tolerance, not
bit-level.
"""

import numpy as np
import pytest
from scipy import stats

from tadkit.core import CovariateSet, InputError, SpecError, TimeSeries
from tadkit.conditional import (
    ConditionalConfig,
    ConditionalScorer,
    JointConfig,
    JointScorer,
    run_conditional,
    run_joint,
)


def _series(values):
    return TimeSeries(0, 3600, np.asarray(values, dtype=float))


def _dataset(target, **covariates):
    return CovariateSet(
        target=_series(target),
        covariates={k: _series(v) for k, v in covariates.items()},
    )


def brute_conditional(config, target, cov_matrix):
    """Re-solve the weighted least-squares problem at every step."""
    ar, clags = config.ar_order, config.covariate_lags
    ncov = cov_matrix.shape[1]
    p = 1 + ar + ncov * (1 + clags)
    max_lag = max(ar, clags)
    lam = config.forgetting
    scores = np.full(len(target), np.nan)
    samples: list[tuple[np.ndarray, float]] = []
    scale = 0.0
    for t in range(len(target)):
        if t < max_lag:
            continue
        a = np.empty(p)
        a[0] = 1.0
        pos = 1
        for i in range(ar):
            a[pos] = target[t - 1 - i]
            pos += 1
        for c in range(ncov):
            a[pos] = cov_matrix[t, c]
            pos += 1
            for i in range(clags):
                a[pos] = cov_matrix[t - 1 - i, c]
                pos += 1
        k = len(samples)
        A = lam**k * config.ridge * np.eye(p)
        b = np.zeros(p)
        for j, (a_j, y_j) in enumerate(samples):
            w = lam ** (k - 1 - j)
            A += w * np.outer(a_j, a_j)
            b += w * a_j * y_j
        theta = np.linalg.solve(A, b)
        err = target[t] - float(theta @ a)
        if t >= max_lag + p:
            scores[t] = abs(err) / max(scale, config.scale_floor)
        samples.append((a, float(target[t])))
        scale = lam * scale + (1.0 - lam) * abs(err)
    return scores


def test_recursion_matches_the_per_step_normal_equations():
    rng = np.random.default_rng(21)
    n = 110
    y = np.sin(np.arange(n) / 5.0) + 0.2 * rng.standard_normal(n)
    z = rng.standard_normal(n)
    x = 1.5 * y - 0.7 * z + 0.1 * rng.standard_normal(n)
    config = ConditionalConfig(
        ar_order=2, covariate_lags=1, forgetting=0.99, ridge=1e-2
    )
    got = run_conditional(config, _dataset(x, temp=y, load=z))
    expected = brute_conditional(config, x, np.column_stack([y, z]))
    assert got.warmup == max(2, 1) + (1 + 2 + 2 * 2)
    assert np.isnan(got.scores[: got.warmup]).all()
    np.testing.assert_allclose(
        got.scores[got.warmup :], expected[got.warmup :], rtol=1e-6, atol=1e-8
    )


def test_oracle_agreement_without_covariates():
    rng = np.random.default_rng(22)
    x = np.cumsum(rng.standard_normal(90)) * 0.3
    config = ConditionalConfig(ar_order=3, forgetting=0.995, ridge=1e-3)
    got = run_conditional(config, _dataset(x))
    expected = brute_conditional(config, x, np.zeros((len(x), 0)))
    np.testing.assert_allclose(
        got.scores[got.warmup :], expected[got.warmup :], rtol=1e-6, atol=1e-8
    )


def test_a_held_relationship_scores_low_and_a_break_scores_high():
    rng = np.random.default_rng(23)
    n = 300
    y = 10.0 + 3.0 * np.sin(np.arange(n) / 12.0) + 0.1 * rng.standard_normal(n)
    x = 2.0 * y + 0.05 * rng.standard_normal(n)
    x[220] += 6.0  # the relationship breaks at one point
    scores = run_conditional(ConditionalConfig(forgetting=0.99), _dataset(x, temp=y))
    assert int(np.nanargmax(scores.scores)) == 220
    others = np.delete(scores.scores[scores.warmup :], 220 - scores.warmup)
    assert scores.scores[220] > 10 * np.median(others)


def test_heatwave_is_jointly_but_not_conditionally_surprising():
    rng = np.random.default_rng(24)
    n = 400
    temp = 20.0 + 5.0 * np.sin(np.arange(n) / 20.0) + 0.3 * rng.standard_normal(n)
    temp[350:360] += 12.0  # heatwave lifts temperature...
    sales = 3.0 * temp + 0.5 * rng.standard_normal(n)  # ...and sales follow suit
    data = _dataset(sales, temp=temp)

    conditional = run_conditional(ConditionalConfig(forgetting=0.99), data)
    joint = run_joint(JointConfig(forgetting=0.99), data)

    window = slice(350, 360)
    cond_base = np.median(conditional.scores[conditional.warmup : 350])
    joint_base = np.median(joint.scores[joint.warmup : 350])
    # the linear relationship held, so the conditional view stays calm
    assert np.max(conditional.scores[window]) < 6 * cond_base + 6
    # the level shift itself is far outside the joint history
    assert np.max(joint.scores[window]) > 10 * joint_base


def brute_joint(config, matrix):
    lam = config.forgetting
    dim = matrix.shape[1]
    min_history = config.min_history or dim + 1
    scores = np.full(len(matrix), np.nan)
    mean = None
    cov = np.zeros((dim, dim))
    seen = 0
    prev = None
    for t in range(len(matrix)):
        if config.differencing:
            if prev is None:
                prev = matrix[t]
                continue
            d = matrix[t] - prev
            prev = matrix[t]
        else:
            d = matrix[t]
        if seen >= min_history:
            e = d - mean
            sigma = cov + config.ridge * np.eye(dim)
            scores[t] = np.sqrt(max(0.0, float(e @ np.linalg.solve(sigma, e))))
        if mean is None:
            mean = d.copy()
        else:
            e = d - mean
            mean = mean + (1 - lam) * e
            cov = lam * cov + (1 - lam) * np.outer(e, e)
        seen += 1
    return scores


def test_joint_scores_match_the_reference_loop():
    rng = np.random.default_rng(25)
    n = 150
    a = np.cumsum(rng.standard_normal(n))
    b = 0.5 * a + rng.standard_normal(n)
    config = JointConfig(forgetting=0.98)
    got = run_joint(config, _dataset(a, other=b))
    expected = brute_joint(config, np.column_stack([a, b]))
    assert np.array_equal(got.scores, expected, equal_nan=True)
    assert got.warmup == 3 + 1  # min_history dim+1, plus one for differencing


def test_joint_distances_look_chi_distributed_on_gaussian_steps():
    rng = np.random.default_rng(26)
    walk = np.cumsum(rng.standard_normal((2000, 3)), axis=0)
    data = _dataset(walk[:, 0], b=walk[:, 1], c=walk[:, 2])
    scores = run_joint(JointConfig(forgetting=0.99), data).scores
    tail = scores[500:]
    expected_median = np.sqrt(stats.chi2.ppf(0.5, df=3))
    assert expected_median * 0.75 < np.median(tail) < expected_median * 1.35


def test_both_scorers_are_prefix_consistent():
    rng = np.random.default_rng(27)
    n = 120
    y = rng.standard_normal(n)
    x = 0.8 * y + 0.1 * rng.standard_normal(n)
    full_data = _dataset(x, y=y)
    cut_data = _dataset(x[:70], y=y[:70])
    for run, config in (
        (run_conditional, ConditionalConfig(forgetting=0.99)),
        (run_joint, JointConfig(forgetting=0.99)),
    ):
        full = run(config, full_data).scores
        cut = run(config, cut_data).scores
        assert np.array_equal(full[:70], cut, equal_nan=True)


class TestValidation:
    @pytest.mark.parametrize(
        "kwargs",
        [
            dict(ar_order=-1),
            dict(covariate_lags=-1),
            dict(forgetting=0.5),
            dict(forgetting=1.01),
            dict(ridge=0.0),
            dict(scale_floor=0.0),
        ],
    )
    def test_conditional_config(self, kwargs):
        with pytest.raises(SpecError):
            ConditionalConfig(**kwargs)

    def test_need_some_regressor(self):
        with pytest.raises(SpecError):
            ConditionalScorer(ConditionalConfig(ar_order=0), n_covariates=0)

    def test_covariate_count_is_checked_each_step(self):
        scorer = ConditionalScorer(ConditionalConfig(), n_covariates=2)
        with pytest.raises(InputError):
            scorer.update(1.0, covariates=(1.0,))

    def test_non_finite_inputs_are_rejected(self):
        scorer = ConditionalScorer(ConditionalConfig(), n_covariates=1)
        with pytest.raises(InputError):
            scorer.update(float("nan"), covariates=(1.0,))
        with pytest.raises(InputError):
            scorer.update(1.0, covariates=(float("inf"),))

    def test_gaps_must_be_resampled_away_first(self):
        x = np.ones(50)
        y = np.ones(50)
        y[10] = np.nan
        with pytest.raises(InputError, match="resample"):
            run_conditional(ConditionalConfig(), _dataset(x, y=y))
        with pytest.raises(InputError, match="resample"):
            run_joint(JointConfig(), _dataset(x, y=y))

    @pytest.mark.parametrize(
        "kwargs",
        [dict(forgetting=0.2), dict(ridge=-1.0), dict(min_history=0)],
    )
    def test_joint_config(self, kwargs):
        with pytest.raises(SpecError):
            JointConfig(**kwargs)

    def test_joint_dimension_is_checked(self):
        scorer = JointScorer(JointConfig(), dim=2)
        with pytest.raises(InputError):
            scorer.update((1.0, 2.0, 3.0))
        with pytest.raises(SpecError):
            JointScorer(JointConfig(), dim=0)
