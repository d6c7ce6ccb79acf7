"""Streaming anomaly scorers with a strict prefix-only contract.

Every detector consumes one point per ``update`` call and emits one score
per call — a NaN sentinel while warming up, a finite value >= 0 after.
The central law is prefix consistency: the score emitted at step t depends
only on the first t points and the config, so streaming over a truncated
series reproduces the full run bit for bit.  Anything that could break
that (refit schedules, window resolution) is keyed to the update index,
never to wall clock or external state.

Four methods spanning the explainability spectrum:

- ``spectral_residual`` — saliency of the newest point in the trailing
  window's log-amplitude spectrum.
- ``ewma_residual`` — forecast error of an exponentially weighted mean,
  scaled by an exponentially weighted absolute deviation.
- ``left_discord`` — z-normalized distance from the newest window to its
  nearest non-overlapping earlier window.
- ``kmeans_window`` — distance from the newest window to the nearest
  centroid of periodically refit window clusters.

``run_batch`` adapts each method to fit-once-on-everything semantics for
the batch evaluation protocol.
"""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass
from math import ceil, isfinite

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .core import (
    MISSING,
    DegenerateScaleError,
    InputError,
    ScoreSequence,
    SpecError,
    TimeSeries,
)
from .periodicity import detect_period_peaks

__all__ = [
    "DetectorConfig",
    "StreamingDetector",
    "make_detector",
    "run_streaming",
    "run_batch",
    "METHODS",
]

METHODS = ("spectral_residual", "ewma_residual", "left_discord", "kmeans_window")

# Guard for log(0) on exactly-zero spectrum bins.
_LOG_EPS = 1e-12
# Relative-saliency denominator guard.
_SAL_EPS = 1e-8
# Window standard deviations at or below this use the raw-distance fallback.
_ZNORM_EPS = 1e-12


@dataclass(frozen=True)
class DetectorConfig:
    """Configuration shared by all detector methods.

    ``window`` may be the string "auto", in which case the detector buffers
    ``auto_resolve_at`` points, estimates the dominant period of that prefix,
    and uses it as the window from then on (``auto_fallback`` when no period
    is found).  Resolution happens at a fixed update index, so it is as
    prefix-consistent as everything else.
    """

    method: str = "spectral_residual"
    window: int | str = 128
    alpha: float = 0.1                  # ewma smoothing factor
    scale_floor: float = 1e-9           # minimum denominator for scaled residuals
    sr_ma_width: int = 3                # moving-average width on the log spectrum
    sr_pad_points: int = 5              # extrapolated points appended to the window
    n_clusters: int = 4
    refit_cadence: int | None = None    # kmeans refit period; None -> window
    auto_resolve_at: int = 256          # prefix length at which "auto" resolves
    auto_fallback: int = 125            # window when no period is detectable

    def __post_init__(self) -> None:
        if self.method not in METHODS:
            raise SpecError(f"unknown detector method {self.method!r}")
        if self.window != "auto":
            if not isinstance(self.window, (int, np.integer)) or isinstance(self.window, bool):
                raise SpecError("window must be an integer or 'auto'")
            if self.window < 2:
                raise SpecError(f"window must be >= 2, got {self.window}")
        if not 0.0 < self.alpha <= 1.0:
            raise SpecError(f"alpha must be in (0, 1], got {self.alpha}")
        if self.scale_floor <= 0.0:
            raise SpecError("scale_floor must be positive")
        if self.sr_ma_width < 1:
            raise SpecError("sr_ma_width must be >= 1")
        if self.sr_pad_points < 0:
            raise SpecError("sr_pad_points must be >= 0")
        if self.n_clusters < 1:
            raise SpecError("n_clusters must be >= 1")
        if self.refit_cadence is not None and self.refit_cadence < 1:
            raise SpecError("refit_cadence must be >= 1")
        if self.auto_resolve_at < 3:
            raise SpecError("auto_resolve_at must be >= 3")
        if self.auto_fallback < 2:
            raise SpecError("auto_fallback must be >= 2")


class StreamingDetector(ABC):
    """One-in-one-out scorer over a single stream.

    Instances are single-stream and not safe for concurrent updates, but
    they are independent and may be moved between threads; the harness runs
    one instance per series.
    """

    def __init__(self, config: DetectorConfig):
        self.config = config
        self.count = 0

    @property
    @abstractmethod
    def warmup(self) -> int:
        """Number of leading sentinel scores before the first real one."""

    @abstractmethod
    def _score(self, x: float) -> float:
        """Consume one point, return its score (MISSING while warming up)."""

    def update(self, x: float) -> float:
        if not isfinite(x):
            raise InputError(f"detector input must be finite, got {x!r}")
        self.count += 1
        return self._score(float(x))


class _GrowingBuffer:
    """Append-only float64 buffer with amortized O(1) append."""

    def __init__(self) -> None:
        self._data = np.empty(256, dtype=np.float64)
        self.n = 0

    def append(self, x: float) -> None:
        if self.n == len(self._data):
            grown = np.empty(2 * len(self._data), dtype=np.float64)
            grown[: self.n] = self._data
            self._data = grown
        self._data[self.n] = x
        self.n += 1

    def view(self) -> np.ndarray:
        return self._data[: self.n]


def _saliency(values: np.ndarray, ma_width: int, pad_points: int) -> np.ndarray:
    """Saliency map of ``values`` (optionally extended by extrapolation).

    The spectral residual is the log-amplitude spectrum minus its moving
    average (edge-normalized, so a flat log spectrum has residual exactly
    zero); inverting with the original phase turns residual energy back
    into per-point saliency.  Only the saliencies of the original points
    are returned.
    """
    n = len(values)
    # The pad estimate must not see the newest point, or a spike there would
    # drag the pads to its own level and hide itself.
    m = min(pad_points, n - 2)
    if m > 0:
        base = values[:-1]
        grads = (base[-1] - base[-1 - m : -1][::-1]) / np.arange(1, m + 1)
        ext = np.concatenate([values, np.full(m, base[-m] + grads.mean() * m)])
    else:
        ext = values
    spectrum = np.fft.fft(ext)
    amplitude = np.abs(spectrum)
    log_amp = np.log(np.maximum(amplitude, _LOG_EPS))
    kernel = np.ones(ma_width)
    ma = np.convolve(log_amp, kernel, mode="same") / np.convolve(
        np.ones(len(ext)), kernel, mode="same"
    )
    residual = log_amp - ma
    phase = np.angle(spectrum)
    sal = np.abs(np.fft.ifft(np.exp(residual + 1j * phase)))
    return sal[:n]


class _SpectralResidualDetector(StreamingDetector):
    def __init__(self, config: DetectorConfig):
        super().__init__(config)
        self._buf = _GrowingBuffer()
        self._w = int(config.window)

    @property
    def warmup(self) -> int:
        return self._w - 1

    def _score(self, x: float) -> float:
        self._buf.append(x)
        if self.count < self._w:
            return MISSING
        window = self._buf.view()[-self._w :]
        sal = _saliency(window, self.config.sr_ma_width, self.config.sr_pad_points)
        mean_sal = float(sal.mean())
        score = (float(sal[-1]) - mean_sal) / (mean_sal + _SAL_EPS)
        return max(0.0, score)


class _EwmaResidualDetector(StreamingDetector):
    def __init__(self, config: DetectorConfig):
        super().__init__(config)
        self._mean: float | None = None
        self._scale = 0.0
        self._resid_count = 0
        self._resid_sum = 0.0
        # one EW span's worth of residuals before the scale stands alone
        self._calibration = ceil(1.0 / config.alpha)

    @property
    def warmup(self) -> int:
        return 1

    def _score(self, x: float) -> float:
        if self._mean is None:
            self._mean = x
            return MISSING
        a = self.config.alpha
        resid = x - self._mean
        r = abs(resid)
        self._resid_count += 1
        if self._resid_count <= self._calibration:
            # a scale estimated from a handful of residuals is one unlucky
            # draw away from making the ratio arbitrary, so the current
            # residual takes part in its own normalization at first; this
            # caps early scores at the step count instead of 1/floor
            self._resid_sum += r
            scale = self._resid_sum / self._resid_count
        else:
            scale = self._scale
        score = r / max(scale, self.config.scale_floor)
        self._mean += a * resid
        self._scale = r if self._resid_count == 1 else (1.0 - a) * self._scale + a * r
        return score


class _LeftDiscordDetector(StreamingDetector):
    def __init__(self, config: DetectorConfig):
        super().__init__(config)
        self._buf = _GrowingBuffer()
        self._w = int(config.window)

    @property
    def warmup(self) -> int:
        return 2 * self._w - 1

    def _score(self, x: float) -> float:
        self._buf.append(x)
        w = self._w
        if self.count < 2 * w:
            return MISSING
        buf = self._buf.view()
        return _nearest_window_distance(buf[-w:], sliding_window_view(buf[: self.count - w], w))


def _nearest_window_distance(query: np.ndarray, candidates: np.ndarray) -> float:
    """Distance from ``query`` to its nearest candidate window.

    Pairs are compared z-normalized; any pair where either side has ~zero
    standard deviation falls back to the raw Euclidean distance for that
    pair (z-normalizing a flat window would be 0/0).
    """
    w = len(query)
    q_mu = query.mean()
    q_sd = query.std()
    c_mu = candidates.mean(axis=1)
    c_sd = candidates.std(axis=1)

    degenerate = (c_sd <= _ZNORM_EPS) | (q_sd <= _ZNORM_EPS)
    best = np.inf
    if not degenerate.all():
        zq = (query - q_mu) / q_sd
        rows = candidates[~degenerate]
        # ||zc - zq||^2 = 2w - 2 zc.zq because both sides have norm sqrt(w)
        dots = (rows @ zq - c_mu[~degenerate] * zq.sum()) / c_sd[~degenerate]
        d2 = 2.0 * w - 2.0 * dots
        best = float(np.sqrt(max(0.0, d2.min())))
    if degenerate.any():
        rows = candidates[degenerate]
        d2 = ((rows - query) ** 2).sum(axis=1)
        best = min(best, float(np.sqrt(d2.min())))
    return best


def _maximin_centers(windows: np.ndarray, k: int) -> np.ndarray:
    """Deterministic k-means++-style seeding without randomness.

    The first center is the window farthest from the population mean; each
    subsequent center is the window farthest from all chosen centers.
    Ties break toward the lowest index.
    """
    first = int(np.argmax(((windows - windows.mean(axis=0)) ** 2).sum(axis=1)))
    chosen = [first]
    min_d2 = ((windows - windows[first]) ** 2).sum(axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(min_d2))
        chosen.append(nxt)
        min_d2 = np.minimum(min_d2, ((windows - windows[nxt]) ** 2).sum(axis=1))
    return windows[chosen].copy()


def _lloyd(windows: np.ndarray, centers: np.ndarray, max_iter: int = 50) -> np.ndarray:
    """Plain Lloyd iterations; empty clusters grab the farthest point."""
    k = len(centers)
    assign = None
    for _ in range(max_iter):
        d2 = ((windows[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        new_assign = d2.argmin(axis=1)
        nearest = d2[np.arange(len(windows)), new_assign]
        for c in range(k):
            members = windows[new_assign == c]
            if len(members):
                centers[c] = members.mean(axis=0)
            else:
                stray = int(np.argmax(nearest))
                centers[c] = windows[stray]
                new_assign[stray] = c
                nearest[stray] = 0.0
        if assign is not None and np.array_equal(assign, new_assign):
            break
        assign = new_assign
    return centers


class _KmeansWindowDetector(StreamingDetector):
    def __init__(self, config: DetectorConfig):
        super().__init__(config)
        self._buf = _GrowingBuffer()
        self._w = int(config.window)
        self._k = config.n_clusters
        self._cadence = config.refit_cadence or self._w
        self._centers: np.ndarray | None = None

    @property
    def warmup(self) -> int:
        return self._k * self._w - 1

    def _score(self, x: float) -> float:
        self._buf.append(x)
        w, k = self._w, self._k
        if self.count < k * w:
            return MISSING
        if (self.count - k * w) % self._cadence == 0:
            windows = sliding_window_view(self._buf.view(), w)
            self._centers = _lloyd(windows.copy(), _maximin_centers(windows, k))
        newest = self._buf.view()[-w:]
        d2 = ((self._centers - newest) ** 2).sum(axis=1)
        return float(np.sqrt(d2.min()))


class _AutoWindowDetector(StreamingDetector):
    """Buffers a prefix, resolves the window from its dominant period, then
    replays the buffer into the real detector.

    Sentinels cover the buffering phase; the inner detector may extend the
    warmup further (its own sentinel phase replays inside the buffer, and
    any real scores it would have produced there are discarded — they were
    already reported as sentinels, and re-reporting would break
    one-in-one-out).
    """

    def __init__(self, config: DetectorConfig):
        super().__init__(config)
        self._inner: StreamingDetector | None = None
        self._pending: list[float] = []

    @property
    def warmup(self) -> int:
        # the resolving update itself already reports a real score when the
        # inner detector's sentinel phase fits inside the buffered prefix
        resolve_at = self.config.auto_resolve_at
        if self._inner is None:
            return resolve_at - 1
        return max(resolve_at - 1, self._inner.warmup)

    def _score(self, x: float) -> float:
        if self._inner is not None:
            return self._inner.update(x)
        self._pending.append(x)
        if self.count < self.config.auto_resolve_at:
            return MISSING
        prefix = TimeSeries(start=0, interval=1, values=np.asarray(self._pending))
        try:
            period = detect_period_peaks(prefix).period
        except (SpecError, DegenerateScaleError):
            period = None
        window = period if period is not None else self.config.auto_fallback
        resolved = DetectorConfig(
            method=self.config.method,
            window=int(window),
            alpha=self.config.alpha,
            scale_floor=self.config.scale_floor,
            sr_ma_width=self.config.sr_ma_width,
            sr_pad_points=self.config.sr_pad_points,
            n_clusters=self.config.n_clusters,
            refit_cadence=self.config.refit_cadence,
        )
        self._inner = make_detector(resolved)
        last = MISSING
        for v in self._pending:
            last = self._inner.update(v)
        self._pending = []
        return last if not np.isnan(last) else MISSING


_DETECTORS = {
    "spectral_residual": _SpectralResidualDetector,
    "ewma_residual": _EwmaResidualDetector,
    "left_discord": _LeftDiscordDetector,
    "kmeans_window": _KmeansWindowDetector,
}


def make_detector(config: DetectorConfig) -> StreamingDetector:
    if config.window == "auto":
        return _AutoWindowDetector(config)
    return _DETECTORS[config.method](config)


def run_streaming(config: DetectorConfig, series: TimeSeries) -> ScoreSequence:
    """Score every point of ``series`` with a fresh streaming detector."""
    values = series.values
    if np.isnan(values).any():
        raise InputError("detectors need a gap-free series; resample first")
    det = make_detector(config)
    scores = np.empty(len(values), dtype=np.float64)
    for i, x in enumerate(values):
        scores[i] = det.update(float(x))
    return ScoreSequence(scores=scores, warmup=_leading_nan(scores))


def _leading_nan(scores: np.ndarray) -> int:
    finite = np.nonzero(~np.isnan(scores))[0]
    return int(finite[0]) if finite.size else len(scores)


def run_batch(config: DetectorConfig, series: TimeSeries) -> ScoreSequence:
    """Fit once on the whole series, score every point.

    Used only by the batch evaluation protocol; the streaming contract does
    not apply here (later points may influence earlier scores).
    """
    values = series.values
    if np.isnan(values).any():
        raise InputError("detectors need a gap-free series; resample first")
    n = len(values)
    if config.window == "auto":
        try:
            period = detect_period_peaks(series).period
        except (SpecError, DegenerateScaleError):
            period = None
        window = int(period) if period is not None else config.auto_fallback
    else:
        window = int(config.window)

    method = config.method
    scores = np.full(n, MISSING, dtype=np.float64)
    if method == "spectral_residual":
        if n:
            sal = _saliency(values, config.sr_ma_width, config.sr_pad_points)
            mean_sal = float(sal.mean())
            scores = np.maximum(0.0, (sal - mean_sal) / (mean_sal + _SAL_EPS))
    elif method == "ewma_residual":
        a = config.alpha
        resid = np.empty(n)
        mean = 0.0
        for i, x in enumerate(values):
            resid[i] = 0.0 if i == 0 else x - mean
            mean = x if i == 0 else mean + a * resid[i]
        scale = max(float(np.abs(resid).mean()) if n else 0.0, config.scale_floor)
        scores = np.abs(resid) / scale
    elif method == "left_discord":
        w = window
        if n >= 2 * w:
            windows = sliding_window_view(values, w)
            for end in range(w - 1, n):
                start = end - w + 1
                # nearest non-overlapping window on either side
                pool = []
                if start - w >= 0:
                    pool.append(windows[: start - w + 1])
                if start + w < len(windows):
                    pool.append(windows[start + w :])
                if pool:
                    scores[end] = _nearest_window_distance(
                        values[start : end + 1], np.vstack(pool)
                    )
    else:  # kmeans_window
        w, k = window, config.n_clusters
        if n >= max(k, 1) * w:
            windows = sliding_window_view(values, w)
            centers = _lloyd(windows.copy(), _maximin_centers(windows, k))
            d2 = ((windows[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
            scores[w - 1 :] = np.sqrt(d2.min(axis=1))
    return ScoreSequence(scores=scores, warmup=_leading_nan(scores))
