"""Evaluation protocols: batch, streaming, and human-in-the-loop.

The three protocols answer the same question — how much does a detector's
alert stream cost against the truth — under different information rules:

- batch: fit once on everything, then judge (the optimistic bound).
- streaming: one forward pass; by the detectors' prefix-consistency law
  this equals refitting on every prefix, at a single pass's cost.
- human-in-the-loop (HIL): the policy sees the raw stream plus an
  append-only feedback log holding the true labels of exactly the points
  it flagged so far.  Labels of unflagged points never leave the harness,
  which is the one-sided censorship a real alert queue imposes.

Regret is the cost sum fn_cost·[miss] + fp_cost·[false alarm] over scored
(non-warmup) points.  Reports always say which protocol produced them —
batch and streaming numbers are never interchangeable.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Protocol, runtime_checkable

import numpy as np

from .core import (
    AlignmentError,
    LabelSequence,
    PopulationDataset,
    ProtocolError,
    SpecError,
    TimeSeries,
)
from .detectors import DetectorConfig, make_detector, run_batch, run_streaming
from .thresholds import ThresholdSpec, Thresholder, apply_batch

__all__ = [
    "LossSpec",
    "FeedbackLog",
    "EvalReport",
    "DelaySummary",
    "Policy",
    "AlwaysFlagPolicy",
    "NeverFlagPolicy",
    "DetectorThresholdPolicy",
    "detection_delay",
    "evaluate_batch",
    "evaluate_streaming",
    "run_hil",
    "run_population",
]


@dataclass(frozen=True)
class LossSpec:
    """Per-point cost of wrong answers.

    ``zero_one`` pins both costs to 1; ``weighted`` keeps what you pass.
    """

    kind: str = "zero_one"
    fn_cost: float = 1.0
    fp_cost: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in ("zero_one", "weighted"):
            raise SpecError(f"unknown loss kind {self.kind!r}")
        if not (np.isfinite(self.fn_cost) and np.isfinite(self.fp_cost)):
            raise SpecError("loss weights must be finite")
        if self.fn_cost < 0 or self.fp_cost < 0:
            raise SpecError("loss weights must be >= 0")
        if self.kind == "zero_one":
            object.__setattr__(self, "fn_cost", 1.0)
            object.__setattr__(self, "fp_cost", 1.0)

    def cost(self, label: int, decision: int) -> float:
        if decision == 0 and label == 1:
            return self.fn_cost
        if decision == 1 and label == 0:
            return self.fp_cost
        return 0.0


class FeedbackLog:
    """Append-only record of (index, true label) for flagged points only."""

    def __init__(self) -> None:
        self._entries: list[tuple[int, int]] = []

    def record(self, index: int, label: int) -> None:
        if self._entries and index <= self._entries[-1][0]:
            raise ProtocolError(
                f"feedback indices must be strictly increasing, got {index} after "
                f"{self._entries[-1][0]}"
            )
        if label not in (0, 1):
            raise SpecError(f"label must be 0 or 1, got {label!r}")
        self._entries.append((int(index), int(label)))

    @property
    def entries(self) -> tuple[tuple[int, int], ...]:
        return tuple(self._entries)

    def indices(self) -> tuple[int, ...]:
        return tuple(i for i, _ in self._entries)

    def __len__(self) -> int:
        return len(self._entries)


@dataclass(frozen=True)
class DelaySummary:
    """Per-event detection delays plus the count of undetected events."""

    delays: tuple[int, ...]
    missed: int

    @property
    def mean_delay(self) -> float | None:
        return float(np.mean(self.delays)) if self.delays else None


@dataclass(frozen=True)
class EvalReport:
    protocol: str
    regret: float
    precision: float
    recall: float
    f1: float
    alert_count: int
    warmup_excluded: int
    detection_delays: tuple[int, ...]
    missed_events: int
    diagnostic_only: bool = False

    def __post_init__(self) -> None:
        if self.regret < 0:
            raise SpecError("regret cannot be negative")
        for name in ("precision", "recall", "f1"):
            v = getattr(self, name)
            if not 0.0 <= v <= 1.0:
                raise SpecError(f"{name} must be in [0, 1], got {v}")


def _label_array(labels: LabelSequence | np.ndarray, n: int) -> np.ndarray:
    arr = labels.labels if isinstance(labels, LabelSequence) else np.asarray(labels)
    if len(arr) != n:
        raise AlignmentError(f"labels length {len(arr)} != series length {n}")
    return arr.astype(np.int8)


def _prf(pred: np.ndarray, lab: np.ndarray) -> tuple[float, float, float]:
    tp = int(np.sum((pred == 1) & (lab == 1)))
    fp = int(np.sum((pred == 1) & (lab == 0)))
    fn = int(np.sum((pred == 0) & (lab == 1)))
    if tp == 0 and fp == 0 and fn == 0:
        # no alerts and nothing to find: vacuously perfect
        return 1.0, 1.0, 1.0
    precision = tp / (tp + fp) if tp + fp else 0.0
    recall = tp / (tp + fn) if tp + fn else 0.0
    f1 = 2 * tp / (2 * tp + fp + fn) if tp else 0.0
    return precision, recall, f1


def _regret(pred: np.ndarray, lab: np.ndarray, loss: LossSpec) -> float:
    fn = np.sum((pred == 0) & (lab == 1))
    fp = np.sum((pred == 1) & (lab == 0))
    return float(loss.fn_cost * fn + loss.fp_cost * fp)


def detection_delay(
    predictions: np.ndarray, labels: np.ndarray, max_delay: int = 0
) -> DelaySummary:
    """Delay from each event's start to its first alert, within a grace window.

    An event is a maximal contiguous run of 1-labels.  Its delay is the
    distance from the event start to the first prediction 1 inside
    [start, end + max_delay]; events with no alert there count as missed.
    """
    if max_delay < 0:
        raise SpecError(f"max_delay must be >= 0, got {max_delay}")
    pred = np.asarray(predictions)
    lab = np.asarray(labels)
    if len(pred) != len(lab):
        raise AlignmentError(f"predictions length {len(pred)} != labels length {len(lab)}")
    n = len(lab)
    delays: list[int] = []
    missed = 0
    t = 0
    while t < n:
        if lab[t] == 1:
            start = t
            while t + 1 < n and lab[t + 1] == 1:
                t += 1
            end = t
            window = pred[start : min(end + max_delay, n - 1) + 1]
            hits = np.nonzero(window == 1)[0]
            if hits.size:
                delays.append(int(hits[0]))
            else:
                missed += 1
        t += 1
    return DelaySummary(delays=tuple(delays), missed=missed)


def _build_report(
    protocol: str,
    pred: np.ndarray,
    lab: np.ndarray,
    loss: LossSpec,
    warmup: int,
    max_delay: int,
) -> EvalReport:
    scored = slice(warmup, None)
    precision, recall, f1 = _prf(pred[scored], lab[scored])
    summary = detection_delay(pred, lab, max_delay)
    return EvalReport(
        protocol=protocol,
        regret=_regret(pred[scored], lab[scored], loss),
        precision=precision,
        recall=recall,
        f1=f1,
        alert_count=int(pred.sum()),
        warmup_excluded=min(warmup, len(pred)),
        detection_delays=summary.delays,
        missed_events=summary.missed,
    )


def evaluate_batch(
    detector_config: DetectorConfig,
    threshold: ThresholdSpec,
    series: TimeSeries,
    labels: LabelSequence | np.ndarray,
    loss: LossSpec | None = None,
    max_delay: int = 0,
) -> EvalReport:
    """Fit-once evaluation: scores and threshold see the whole series."""
    loss = loss or LossSpec()
    lab = _label_array(labels, len(series.values))
    scores = run_batch(detector_config, series)
    pred = apply_batch(threshold, scores)
    return _build_report("batch", pred, lab, loss, scores.warmup, max_delay)


def _stream_decisions(
    detector_config: DetectorConfig, threshold: ThresholdSpec, series: TimeSeries
) -> tuple[np.ndarray, int]:
    scores = run_streaming(detector_config, series)
    thresholder = Thresholder(threshold)
    pred = np.fromiter(
        (thresholder.update(float(s)) for s in scores.scores),
        dtype=np.int8,
        count=len(scores.scores),
    )
    return pred, scores.warmup


def evaluate_streaming(
    detector_config: DetectorConfig,
    threshold: ThresholdSpec,
    series: TimeSeries,
    labels: LabelSequence | np.ndarray,
    loss: LossSpec | None = None,
    max_delay: int = 0,
) -> EvalReport:
    """Single forward pass; equals a per-prefix refit by prefix consistency."""
    loss = loss or LossSpec()
    lab = _label_array(labels, len(series.values))
    pred, warmup = _stream_decisions(detector_config, threshold, series)
    return _build_report("streaming", pred, lab, loss, warmup, max_delay)


@runtime_checkable
class Policy(Protocol):
    """Decision maker for the interactive protocol.

    ``decide`` sees the value prefix x_1..x_t and the feedback log (true
    labels of previously flagged points only) and answers 0 or 1 for t.
    ``warmup`` is how many leading decisions are formality (excluded from
    regret, like detector warmup).
    """

    @property
    def warmup(self) -> int: ...

    def decide(self, prefix: np.ndarray, log: FeedbackLog) -> int: ...


class AlwaysFlagPolicy:
    warmup = 0

    def decide(self, prefix: np.ndarray, log: FeedbackLog) -> int:
        return 1


class NeverFlagPolicy:
    warmup = 0

    def decide(self, prefix: np.ndarray, log: FeedbackLog) -> int:
        return 0


class DetectorThresholdPolicy:
    """Streaming detector + thresholder composed into a HIL policy.

    New feedback entries are forwarded to the thresholder at the start of
    each decision, so a feedback_adaptive threshold reacts from the very
    next point on; other threshold kinds simply ignore the annotations.
    """

    def __init__(self, detector_config: DetectorConfig, threshold: ThresholdSpec):
        self._detector = make_detector(detector_config)
        self._thresholder = Thresholder(threshold)
        self._consumed = 0

    @property
    def warmup(self) -> int:
        return self._detector.warmup

    def decide(self, prefix: np.ndarray, log: FeedbackLog) -> int:
        for index, label in log.entries[self._consumed :]:
            self._thresholder.feedback(label)
            self._consumed += 1
        score = self._detector.update(float(prefix[-1]))
        return self._thresholder.update(score)


def run_hil(
    policy: Policy,
    series: TimeSeries,
    labels: LabelSequence | np.ndarray,
    loss: LossSpec | None = None,
    max_delay: int = 0,
) -> tuple[EvalReport, FeedbackLog]:
    """Interactive loop with one-sided feedback.

    At each t the policy decides from (x_{<=t}, feedback so far); iff it
    flags, the true label of t is appended to the log before t+1.  The
    label array itself never reaches the policy.
    """
    loss = loss or LossSpec()
    values = series.values
    lab = _label_array(labels, len(values))
    log = FeedbackLog()
    pred = np.zeros(len(values), dtype=np.int8)
    for t in range(len(values)):
        decision = policy.decide(values[: t + 1], log)
        if decision not in (0, 1):
            raise ProtocolError(f"policy returned {decision!r}, expected 0 or 1")
        pred[t] = decision
        if decision == 1:
            log.record(t, int(lab[t]))
    if log.indices() != tuple(np.nonzero(pred == 1)[0]):
        raise ProtocolError("feedback log out of sync with flagged points")
    warmup = int(policy.warmup)
    return _build_report("hil", pred, lab, loss, warmup, max_delay), log


def run_population(
    detector_config: DetectorConfig,
    threshold: ThresholdSpec,
    population: PopulationDataset,
) -> np.ndarray:
    """Independent streaming decisions per series; rows follow input order."""
    rows = [
        _stream_decisions(detector_config, threshold, s)[0] for s in population.series
    ]
    return np.vstack(rows) if rows else np.zeros((0, 0), dtype=np.int8)
