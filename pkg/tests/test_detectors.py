import math

import numpy as np
import pytest

from tadkit.core import InputError, SpecError, TimeSeries
from tadkit.detectors import (
    METHODS,
    DetectorConfig,
    make_detector,
    run_batch,
    run_streaming,
)


def _series(values):
    return TimeSeries(0, 60, np.asarray(values, dtype=float))


def _spiky_series(n=300, spike_at=220, seed=7):
    rng = np.random.default_rng(seed)
    values = np.sin(np.arange(n) / 8.0) + 0.05 * rng.standard_normal(n)
    values[spike_at] += 6.0
    return _series(values), spike_at


def test_config_validation():
    with pytest.raises(SpecError):
        DetectorConfig(method="unknown")
    with pytest.raises(SpecError):
        DetectorConfig(window=1)
    with pytest.raises(SpecError):
        DetectorConfig(window=True)
    with pytest.raises(SpecError):
        DetectorConfig(window="sometimes")
    with pytest.raises(SpecError):
        DetectorConfig(alpha=0.0)
    with pytest.raises(SpecError):
        DetectorConfig(n_clusters=0)
    with pytest.raises(SpecError):
        DetectorConfig(refit_cadence=0)


def test_update_rejects_non_finite():
    det = make_detector(DetectorConfig(method="ewma_residual"))
    with pytest.raises(InputError):
        det.update(float("nan"))
    with pytest.raises(InputError):
        det.update(float("inf"))


@pytest.mark.parametrize("method", METHODS)
def test_one_in_one_out_and_warmup_shape(method):
    config = DetectorConfig(method=method, window=8, n_clusters=2)
    series = _series(np.sin(np.arange(120) / 3.0))
    out = run_streaming(config, series)
    assert len(out) == len(series)
    assert out.warmup == make_detector(config).warmup
    assert np.isnan(out.scores[: out.warmup]).all()
    assert np.isfinite(out.scores[out.warmup :]).all()


def test_run_streaming_rejects_gaps():
    holed = TimeSeries(0, 60, np.array([1.0, np.nan, 2.0]))
    with pytest.raises(InputError):
        run_streaming(DetectorConfig(method="ewma_residual"), holed)


# --- spectral residual -------------------------------------------------------


def test_sr_constant_series_scores_zero():
    config = DetectorConfig(method="spectral_residual", window=32)
    out = run_streaming(config, _series(np.full(100, 4.0)))
    assert np.all(out.scores[out.warmup :] <= 1e-6)


def test_sr_scores_are_nonnegative():
    series, _ = _spiky_series()
    out = run_streaming(DetectorConfig(method="spectral_residual", window=64), series)
    assert np.all(out.scores[out.warmup :] >= 0.0)


def test_sr_spike_is_the_top_score():
    series, spike_at = _spiky_series()
    out = run_streaming(DetectorConfig(method="spectral_residual", window=64), series)
    assert int(np.nanargmax(out.scores)) == spike_at


def test_sr_batch_finds_the_spike_too():
    series, spike_at = _spiky_series()
    out = run_batch(DetectorConfig(method="spectral_residual", window=64), series)
    assert out.warmup == 0
    assert int(np.argmax(out.scores)) == spike_at


# --- ewma residual -----------------------------------------------------------


def test_ewma_step_after_a_long_constant_run_hits_the_scale_floor():
    config = DetectorConfig(method="ewma_residual", alpha=0.25, scale_floor=1e-9)
    det = make_detector(config)
    assert math.isnan(det.update(3.0))     # warmup: mean pinned to 3.0
    for _ in range(14):
        assert det.update(3.0) == 0.0      # zero residuals leave the scale at 0
    # residual 2.0 against a zero scale -> the floor sets the magnitude
    assert det.update(5.0) == 2.0 / 1e-9


def test_ewma_early_scores_are_self_calibrated():
    # alpha 0.5 -> the first ceil(1/alpha)=2 residuals normalize against a
    # mean that includes themselves, so a noisy start cannot explode
    det = make_detector(DetectorConfig(method="ewma_residual", alpha=0.5))
    det.update(0.0)
    assert det.update(4.0) == 1.0          # residual 4 over mean(|4|)
    assert det.update(6.0) == 1.0          # residual 4 over mean(|4|,|4|)
    # calibration over: residual 8 against the EW scale of 4
    assert det.update(12.0) == pytest.approx(8.0 / 4.0)


def test_ewma_noisy_start_does_not_emit_an_outlier_score():
    rng = np.random.default_rng(3)
    det = make_detector(DetectorConfig(method="ewma_residual", alpha=0.2))
    scores = [det.update(float(x)) for x in rng.normal(0.0, 0.5, size=50)]
    assert max(scores[1:]) < 20.0


def test_ewma_batch_uses_one_global_scale():
    values = np.zeros(50)
    values[20] = 10.0
    out = run_batch(DetectorConfig(method="ewma_residual", alpha=0.1), _series(values))
    assert len(out) == 50
    assert int(np.nanargmax(out.scores)) == 20


# --- left discord ------------------------------------------------------------


def brute_nearest_distance(query, candidates, eps=1e-12):
    """Plain-loop z-normalized nearest-window distance."""
    best = float("inf")
    q_sd = query.std()
    for cand in candidates:
        c_sd = cand.std()
        if q_sd <= eps or c_sd <= eps:
            d = math.sqrt(float(((query - cand) ** 2).sum()))
        else:
            zq = (query - query.mean()) / q_sd
            zc = (cand - cand.mean()) / c_sd
            d = math.sqrt(float(((zq - zc) ** 2).sum()))
        best = min(best, d)
    return best


def test_discord_matches_brute_force():
    rng = np.random.default_rng(0)
    values = rng.standard_normal(90)
    values[40:50] = 0.0  # plant some flat (degenerate) windows too
    w = 6
    out = run_streaming(DetectorConfig(method="left_discord", window=w), _series(values))
    for t in range(2 * w - 1, 90):
        query = values[t - w + 1 : t + 1]
        candidates = [values[s : s + w] for s in range(t - 2 * w + 2)]
        assert out.scores[t] == pytest.approx(
            brute_nearest_distance(query, candidates), abs=1e-8
        )


def test_discord_repeating_pattern_scores_near_zero():
    values = np.tile(np.array([0.0, 2.0, 1.0, -1.0, 0.5]), 30)
    out = run_streaming(DetectorConfig(method="left_discord", window=10), _series(values))
    assert np.all(out.scores[out.warmup :] < 1e-6)


def test_discord_novel_shape_scores_high():
    values = np.tile(np.array([0.0, 2.0, 1.0, -1.0, 0.5]), 30).copy()
    out_clean = run_streaming(DetectorConfig(method="left_discord", window=10), _series(values))
    values[120] = 25.0
    out = run_streaming(DetectorConfig(method="left_discord", window=10), _series(values))
    assert out.scores[120] > 10 * max(out_clean.scores[120], 1e-12)


def test_discord_is_scale_invariant_when_nondegenerate():
    rng = np.random.default_rng(3)
    values = rng.standard_normal(70)
    a = run_streaming(DetectorConfig(method="left_discord", window=5), _series(values))
    b = run_streaming(
        DetectorConfig(method="left_discord", window=5), _series(7.0 * values + 100.0)
    )
    np.testing.assert_allclose(a.scores[a.warmup :], b.scores[b.warmup :], atol=1e-8)


def test_discord_batch_sees_both_sides():
    # batch may use future windows: a motif that only reappears later still
    # has a near-zero batch score at its first occurrence
    motif = np.array([0.0, 5.0, -5.0, 2.0])
    rng = np.random.default_rng(9)
    values = rng.standard_normal(80)
    values[10:14] = motif
    values[60:64] = motif
    config = DetectorConfig(method="left_discord", window=4)
    stream = run_streaming(config, _series(values))
    batch = run_batch(config, _series(values))
    assert batch.scores[13] < 1e-9          # future twin found
    assert stream.scores[13] > 0.1          # streaming could not see it


# --- k-means windows ---------------------------------------------------------


def test_kmeans_cyclic_stream_scores_zero():
    motif = np.array([0.0, 1.0, 3.0, -2.0])
    values = np.tile(motif, 20)
    config = DetectorConfig(method="kmeans_window", window=4, n_clusters=4)
    out = run_streaming(config, _series(values))
    assert out.warmup == 15
    assert np.all(out.scores[out.warmup :] == 0.0)


def test_kmeans_novelty_scores_positive():
    motif = np.array([0.0, 1.0, 3.0, -2.0])
    values = np.tile(motif, 20).copy()
    values[70] = 30.0
    config = DetectorConfig(method="kmeans_window", window=4, n_clusters=4)
    out = run_streaming(config, _series(values))
    assert out.scores[70] > 1.0


def test_kmeans_batch_scores_every_full_window():
    values = np.tile(np.array([0.0, 1.0, 3.0, -2.0]), 10)
    config = DetectorConfig(method="kmeans_window", window=4, n_clusters=4)
    out = run_batch(config, _series(values))
    assert out.warmup == 3
    assert np.all(out.scores[3:] == 0.0)


# --- auto window -------------------------------------------------------------


def test_auto_window_resolves_from_the_dominant_period():
    values = np.sin(2 * np.pi * np.arange(400) / 25.0)
    config = DetectorConfig(
        method="spectral_residual", window="auto", auto_resolve_at=200, auto_fallback=64
    )
    det = make_detector(config)
    assert det.warmup == 199
    out = run_streaming(config, _series(values))
    assert len(out) == 400
    assert out.warmup == 199
    assert np.isfinite(out.scores[199:]).all()
    assert det.config.window == "auto"  # the public config is untouched


def test_auto_window_falls_back_when_period_undetectable():
    ramp = np.arange(300, dtype=float)
    config = DetectorConfig(
        method="ewma_residual", window="auto", auto_resolve_at=100, auto_fallback=50
    )
    out = run_streaming(config, _series(ramp))
    assert out.warmup == 99
    assert np.isfinite(out.scores[99:]).all()
