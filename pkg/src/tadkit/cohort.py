"""Attribute-rule mining over a population of series.

Given "series i is anomalous right now" bits and categorical attributes per
series (device type, region, ...), find simple conjunctive rules such as
(device = A AND region = B) whose matched set lines up with the anomalous
set.  Search is exhaustive over conjunctions of up to ``max_depth``
distinct attributes, which is tractable precisely because real fleets have
few categorical dimensions — a guardrail refuses absurd candidate counts
rather than silently sampling.

Ranking prefers, in order: higher quality score, fewer terms (a more
general rule beats its refinements on ties), then lexicographic order for
full determinism.
"""

from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations, product
from typing import Mapping, Sequence

import numpy as np

from .core import SchemaError, SpecError

__all__ = [
    "Rule",
    "CohortMinerConfig",
    "RuleInterval",
    "mine_rules",
    "mine_rules_over_time",
]


@dataclass(frozen=True)
class Rule:
    """Conjunction of (attribute = value) terms with its quality score."""

    terms: tuple[tuple[str, str], ...]
    score: float
    coverage: int

    def __post_init__(self) -> None:
        attrs = [a for a, _ in self.terms]
        if len(set(attrs)) != len(attrs):
            raise SpecError("rule attributes must be distinct")
        if not self.terms:
            raise SpecError("a rule needs at least one term")
        if not 0.0 <= self.score <= 1.0:
            raise SpecError(f"score must be in [0, 1], got {self.score}")
        object.__setattr__(self, "terms", tuple(sorted(self.terms)))

    def matches(self, attributes: Mapping[str, str]) -> bool:
        return all(attributes.get(a) == v for a, v in self.terms)

    def __str__(self) -> str:
        return " AND ".join(f"{a}={v}" for a, v in self.terms)


@dataclass(frozen=True)
class CohortMinerConfig:
    max_depth: int = 2
    min_score: float = 1e-6     # rules scoring below this are not returned
    quality: str = "f1"
    min_recall: float = 0.5     # only used by precision_at_min_recall
    max_candidates: int = 1_000_000

    def __post_init__(self) -> None:
        if self.max_depth < 1:
            raise SpecError("max_depth must be >= 1")
        if not 0.0 < self.min_score <= 1.0:
            raise SpecError(f"min_score must be in (0, 1], got {self.min_score}")
        if self.quality not in ("f1", "precision_at_min_recall"):
            raise SpecError(f"unknown quality metric {self.quality!r}")
        if not 0.0 < self.min_recall <= 1.0:
            raise SpecError("min_recall must be in (0, 1]")
        if self.max_candidates < 1:
            raise SpecError("max_candidates must be >= 1")


def _check_schema(attributes: Sequence[Mapping[str, str]]) -> tuple[str, ...]:
    if not attributes:
        raise SpecError("need at least one series")
    schema = tuple(sorted(attributes[0]))
    for i, row in enumerate(attributes):
        if tuple(sorted(row)) != schema:
            raise SchemaError(
                f"series {i} has attributes {sorted(row)}, expected {list(schema)}"
            )
    return schema


def _term_masks(
    attributes: Sequence[Mapping[str, str]], schema: tuple[str, ...]
) -> dict[str, dict[str, np.ndarray]]:
    masks: dict[str, dict[str, np.ndarray]] = {a: {} for a in schema}
    for attr in schema:
        column = np.array([row[attr] for row in attributes])
        for value in np.unique(column):
            masks[attr][str(value)] = column == value
    return masks


def _quality(
    config: CohortMinerConfig, mask: np.ndarray, anomalous: np.ndarray, positives: int
) -> float:
    tp = int(np.sum(mask & anomalous))
    if tp == 0:
        return 0.0
    covered = int(mask.sum())
    precision = tp / covered
    recall = tp / positives
    if config.quality == "f1":
        return 2 * precision * recall / (precision + recall)
    return precision if recall >= config.min_recall else 0.0


def mine_rules(
    anomalous,
    attributes: Sequence[Mapping[str, str]],
    config: CohortMinerConfig | None = None,
) -> list[Rule]:
    """Ranked conjunctive rules explaining which series are anomalous.

    ``anomalous`` is one 0/1 entry per series, aligned with ``attributes``.
    Returns an empty list when nothing is anomalous — there is nothing to
    explain.  The result order is total: score descending, then term count
    ascending (generality preference), then lexicographic.
    """
    config = config or CohortMinerConfig()
    schema = _check_schema(attributes)
    anom = np.asarray(anomalous).astype(bool)
    if len(anom) != len(attributes):
        raise SchemaError(
            f"anomaly vector length {len(anom)} != series count {len(attributes)}"
        )
    positives = int(anom.sum())
    if positives == 0:
        return []

    masks = _term_masks(attributes, schema)
    sizes = {a: len(vals) for a, vals in masks.items()}
    total = 0
    for depth in range(1, config.max_depth + 1):
        for attrs in combinations(schema, depth):
            block = 1
            for a in attrs:
                block *= sizes[a]
            total += block
    if total > config.max_candidates:
        raise SpecError(
            f"{total} candidate rules exceed the guardrail of {config.max_candidates}; "
            "reduce max_depth or pre-bin attributes coarser"
        )

    rules: list[Rule] = []
    for depth in range(1, config.max_depth + 1):
        for attrs in combinations(schema, depth):
            value_lists = [sorted(masks[a]) for a in attrs]
            for values in product(*value_lists):
                mask = masks[attrs[0]][values[0]]
                for a, v in zip(attrs[1:], values[1:]):
                    mask = mask & masks[a][v]
                score = _quality(config, mask, anom, positives)
                if score >= config.min_score:
                    rules.append(
                        Rule(
                            terms=tuple(zip(attrs, values)),
                            score=score,
                            coverage=int(mask.sum()),
                        )
                    )
    rules.sort(key=lambda r: (-r.score, len(r.terms), r.terms))
    return rules


@dataclass(frozen=True)
class RuleInterval:
    """Half-open time range [start, end) during which one rule was on top."""

    start: int
    end: int
    rule: Rule

    def __post_init__(self) -> None:
        if not self.start < self.end:
            raise SpecError("interval must be non-empty")


def mine_rules_over_time(
    anomaly_matrix,
    attributes: Sequence[Mapping[str, str]],
    config: CohortMinerConfig | None = None,
    min_support: int = 1,
) -> tuple[RuleInterval, ...]:
    """Top rule per timestep, merged into intervals while it stays the same.

    ``anomaly_matrix`` is (series x time).  Timesteps with fewer than
    ``min_support`` anomalous series (or where no rule clears min_score)
    produce no rule and break any open interval.
    """
    config = config or CohortMinerConfig()
    if min_support < 1:
        raise SpecError("min_support must be >= 1")
    matrix = np.asarray(anomaly_matrix)
    if matrix.size == 0:
        return ()
    if matrix.ndim != 2:
        raise SpecError(f"anomaly matrix must be 2-D, got shape {matrix.shape}")
    _check_schema(attributes)
    if matrix.shape[0] != len(attributes):
        raise SchemaError(
            f"matrix has {matrix.shape[0]} rows but {len(attributes)} attribute rows"
        )

    intervals: list[RuleInterval] = []
    open_rule: Rule | None = None
    open_start = 0
    for t in range(matrix.shape[1]):
        column = matrix[:, t]
        top: Rule | None = None
        if int(column.sum()) >= min_support:
            ranked = mine_rules(column, attributes, config)
            if ranked:
                top = ranked[0]
        if open_rule is not None and (top is None or top.terms != open_rule.terms):
            intervals.append(RuleInterval(open_start, t, open_rule))
            open_rule = None
        if top is not None and open_rule is None:
            open_rule = top
            open_start = t
    if open_rule is not None:
        intervals.append(RuleInterval(open_start, matrix.shape[1], open_rule))
    return tuple(intervals)
