"""Turn streaming scores into binary alert decisions.

A :class:`Thresholder` consumes one score per step and answers 0/1.  The
threshold in force at step t is computed from scores (and feedback) seen
strictly before t — decide first, then fold the new score into state — so
the same truncation invariance that detectors guarantee holds here too.
Warmup sentinel scores (NaN) map to decision 0 and leave every piece of
state untouched, including the reservoir RNG.

Four strategies:

- ``fixed_value`` — constant threshold.
- ``trailing_percentile`` — percentile of past scores, estimated from a
  bounded seeded reservoir (or exactly over a trailing ``horizon``).
- ``k_sigma`` — running mean plus k running standard deviations.
- ``feedback_adaptive`` — a fixed starting threshold that multiplies up on
  annotated false positives and down on annotated true positives.

Feedback is censored by protocol: it may only describe a point that was
actually flagged, which is exactly the one-sided labeling a human operator
working through an alert queue can produce.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from math import isnan

import numpy as np

from .core import ProtocolError, ScoreSequence, SpecError

__all__ = [
    "ThresholdSpec",
    "Thresholder",
    "apply_batch",
    "oracle_fixed_threshold",
    "KINDS",
]

KINDS = ("fixed_value", "trailing_percentile", "k_sigma", "feedback_adaptive")


@dataclass(frozen=True)
class ThresholdSpec:
    kind: str = "trailing_percentile"
    value: float = 1.0                  # fixed_value / feedback_adaptive start
    percentile: float = 0.999           # trailing_percentile, in (0, 1)
    k: float = 3.0                      # k_sigma multiplier
    up: float = 1.1                     # feedback_adaptive false-positive factor
    down: float = 0.98                  # feedback_adaptive true-positive factor
    horizon: int | None = None          # exact trailing window; None -> reservoir
    reservoir_size: int = 4096
    seed: int = 0

    def __post_init__(self) -> None:
        if self.kind not in KINDS:
            raise SpecError(f"unknown threshold kind {self.kind!r}")
        if not np.isfinite(self.value):
            raise SpecError("value must be finite")
        if not 0.0 < self.percentile < 1.0:
            raise SpecError(f"percentile must be in (0, 1), got {self.percentile}")
        if self.k <= 0.0:
            raise SpecError(f"k must be > 0, got {self.k}")
        if self.up <= 1.0:
            raise SpecError(f"up factor must be > 1, got {self.up}")
        if not 0.0 < self.down <= 1.0:
            raise SpecError(f"down factor must be in (0, 1], got {self.down}")
        if self.horizon is not None and self.horizon < 1:
            raise SpecError("horizon must be >= 1")
        if self.reservoir_size < 1:
            raise SpecError("reservoir_size must be >= 1")


class Thresholder:
    """Streaming score -> decision converter with prefix-only state."""

    def __init__(self, spec: ThresholdSpec):
        self.spec = spec
        self._awaiting_feedback = False
        # trailing_percentile state
        self._reservoir: list[float] = []
        self._seen = 0
        self._rng = np.random.default_rng(np.random.SeedSequence([spec.seed]))
        self._window: deque[float] | None = (
            deque(maxlen=spec.horizon) if spec.horizon is not None else None
        )
        # k_sigma state (Welford)
        self._n = 0
        self._mean = 0.0
        self._m2 = 0.0
        # feedback_adaptive state
        self._adaptive = spec.value

    @property
    def threshold(self) -> float:
        """The threshold that the next score will be compared against.

        +inf until the strategy has any state to speak from, so nothing is
        flagged off an empty history.
        """
        kind = self.spec.kind
        if kind == "fixed_value":
            return self.spec.value
        if kind == "feedback_adaptive":
            return self._adaptive
        if kind == "trailing_percentile":
            pool = self._window if self._window is not None else self._reservoir
            if not pool:
                return np.inf
            return float(np.quantile(np.asarray(pool), self.spec.percentile))
        # k_sigma
        if self._n < 2:
            return np.inf
        return self._mean + self.spec.k * float(np.sqrt(self._m2 / self._n))

    def update(self, score: float) -> int:
        """Decide on one score, then absorb it into state.

        NaN (warmup sentinel) returns 0 and touches nothing.
        """
        if isnan(score):
            return 0
        decision = 1 if score > self.threshold else 0
        self._absorb(float(score))
        self._awaiting_feedback = decision == 1
        return decision

    def _absorb(self, score: float) -> None:
        kind = self.spec.kind
        if kind == "trailing_percentile":
            if self._window is not None:
                self._window.append(score)
                return
            self._seen += 1
            if len(self._reservoir) < self.spec.reservoir_size:
                self._reservoir.append(score)
            else:
                j = int(self._rng.integers(1, self._seen + 1))
                if j <= self.spec.reservoir_size:
                    self._reservoir[j - 1] = score
        elif kind == "k_sigma":
            self._n += 1
            delta = score - self._mean
            self._mean += delta / self._n
            self._m2 += delta * (score - self._mean)
        # fixed_value and feedback_adaptive hold no score state

    def feedback(self, label: int) -> None:
        """Annotate the most recent decision; only flagged points qualify.

        ``label`` is the true status of the flagged point: 0 means the alert
        was a false positive (threshold multiplies by ``up``), 1 a true
        positive (multiplies by ``down``).  Strategies other than
        feedback_adaptive accept and ignore the annotation; the censorship
        rule is enforced for all of them.
        """
        if not self._awaiting_feedback:
            raise ProtocolError(
                "feedback is only accepted for the most recent flagged point"
            )
        if label not in (0, 1):
            raise SpecError(f"label must be 0 or 1, got {label!r}")
        self._awaiting_feedback = False
        if self.spec.kind == "feedback_adaptive":
            self._adaptive *= self.spec.up if label == 0 else self.spec.down


def apply_batch(spec: ThresholdSpec, scores: ScoreSequence | np.ndarray) -> np.ndarray:
    """Batch decisions: one threshold fit on the full score set.

    The batch protocol may look at everything, so trailing_percentile uses
    the percentile of all finite scores and k_sigma their global mean/std.
    feedback_adaptive stays at its starting value — there is no feedback
    loop outside the interactive protocol.  Sentinels decide 0.
    """
    arr = scores.scores if isinstance(scores, ScoreSequence) else np.asarray(scores, float)
    finite = arr[~np.isnan(arr)]
    kind = spec.kind
    if kind == "fixed_value" or kind == "feedback_adaptive":
        thr = spec.value
    elif kind == "trailing_percentile":
        thr = float(np.quantile(finite, spec.percentile)) if finite.size else np.inf
    else:  # k_sigma
        if finite.size >= 2:
            thr = float(finite.mean() + spec.k * finite.std())
        else:
            thr = np.inf
    decisions = np.zeros(len(arr), dtype=np.int8)
    with np.errstate(invalid="ignore"):
        decisions[np.nan_to_num(arr, nan=-np.inf) > thr] = 1
    return decisions


def oracle_fixed_threshold(
    scores: np.ndarray, labels: np.ndarray
) -> tuple[float, float]:
    """Best-F1 fixed threshold in hindsight. DIAGNOSTIC ONLY.

    Needs the ground truth of every point, which no deployed system has;
    reports built from it must carry the diagnostic_only flag.  Returns
    ``(threshold, f1)`` maximizing F1 of ``score > threshold``.
    """
    arr = np.asarray(scores, dtype=np.float64)
    lab = np.asarray(labels)
    finite = np.unique(arr[~np.isnan(arr)])
    if finite.size == 0:
        return np.inf, 0.0
    # candidate thresholds: one just below each distinct score, plus one above all
    candidates = np.concatenate([[np.nextafter(finite[0], -np.inf)],
                                 (finite[:-1] + finite[1:]) / 2.0,
                                 [finite[-1]]])
    best_thr, best_f1 = np.inf, -1.0
    positives = int(lab.sum())
    for thr in candidates:
        pred = np.nan_to_num(arr, nan=-np.inf) > thr
        tp = int(np.sum(pred & (lab == 1)))
        fp = int(np.sum(pred & (lab == 0)))
        fn = positives - tp
        if tp == 0 and fp == 0 and fn == 0:
            f1 = 1.0
        elif tp == 0:
            f1 = 0.0
        else:
            f1 = 2.0 * tp / (2.0 * tp + fp + fn)
        if f1 > best_f1:
            best_thr, best_f1 = float(thr), f1
    return best_thr, best_f1
