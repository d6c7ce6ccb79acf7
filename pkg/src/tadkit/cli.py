"""Command-line surface: CSV ingestion, experiment dispatch, report files.

Everything here is plumbing around the library modules.  Three conventions
keep runs reproducible and diff-friendly:

- Configuration is a single flat JSON document; command-line flags override
  config keys, which override defaults.  The merged configuration is echoed
  into the report, so any report can be re-run from its own meta record.
- Timestamps are serialized as integer epoch seconds.
- Reports are ``report.jsonl`` (one JSON object per line, keys sorted) plus
  ``summary.csv``.  Wall-clock numbers live only under the keys named in
  :data:`TIMING_FIELDS`; stripping those keys makes two runs of the same
  config byte-comparable.
"""

from __future__ import annotations

import csv
import json
import platform
import sys
import time
from dataclasses import asdict, dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any, Callable, Mapping

import click
import numpy as np

from . import __version__
from .cohort import CohortMinerConfig, mine_rules, mine_rules_over_time
from .conditional import ConditionalConfig, JointConfig, run_conditional, run_joint
from .core import (
    AlignmentError,
    CovariateSet,
    EventStream,
    FormatError,
    InputError,
    LabelSequence,
    OrderingError,
    SchemaError,
    SpecError,
    TadError,
    TimeSeries,
)
from .datagen import InjectionConfig, PeriodicGeneratorConfig, generate_periodic, inject_point_anomalies
from .detectors import DetectorConfig, run_batch, run_streaming
from .evaluation import DetectorThresholdPolicy, LossSpec, evaluate_batch, evaluate_streaming, run_hil
from .periodicity import DEFAULT_METHODS, run_period_benchmark
from .resample import ResampleSpec, resample
from .thresholds import Thresholder, ThresholdSpec, apply_batch

__all__ = [
    "TASKS",
    "TIMING_FIELDS",
    "ExperimentConfig",
    "RunReport",
    "load_series_csv",
    "load_labeled_csv",
    "write_series_csv",
    "load_attributes_csv",
    "load_matrix_csv",
    "load_covariates_csv",
    "run_experiment",
    "write_report",
    "strip_timings",
    "main",
]

TASKS = (
    "datagen",
    "resample",
    "detect",
    "evaluate",
    "hil",
    "bench-period",
    "conditional",
    "cohort",
)

#: Keys whose values are wall-clock measurements.  Everything else in a
#: report is a pure function of the echoed config.
TIMING_FIELDS = frozenset({"timings", "wall_s", "mean_runtime_s"})


# ---------------------------------------------------------------------------
# CSV ingestion


def _timestamps(series: TimeSeries | EventStream) -> np.ndarray:
    if isinstance(series, TimeSeries):
        return series.timestamps()
    return series.timestamps


def _parse_timestamp(text: str, where: str) -> int:
    raw = text.strip()
    try:
        return int(raw)
    except ValueError:
        pass
    iso = raw[:-1] + "+00:00" if raw.endswith(("Z", "z")) else raw
    try:
        stamp = datetime.fromisoformat(iso)
    except ValueError:
        raise FormatError(
            f"{where}: unparseable timestamp {text!r} (want epoch seconds or RFC-3339)"
        ) from None
    if stamp.tzinfo is None:
        stamp = stamp.replace(tzinfo=timezone.utc)
    epoch = stamp.timestamp()
    if epoch != int(epoch):
        raise FormatError(f"{where}: sub-second timestamps are not supported: {text!r}")
    return int(epoch)


def _parse_float(text: str, where: str, column: str) -> float:
    try:
        return float(text)
    except ValueError:
        raise FormatError(f"{where}: unparseable {column} {text!r}") from None


def _read_rows(path) -> list[list[str]]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"input file not found: {path}")
    with open(path, newline="") as handle:
        rows = [row for row in csv.reader(handle) if any(cell.strip() for cell in row)]
    return rows


def load_labeled_csv(path) -> tuple[TimeSeries | EventStream, LabelSequence | None]:
    """Like :func:`load_series_csv`, also returning the label column if present."""
    path = Path(path)
    rows = _read_rows(path)
    if not rows:
        raise FormatError(f"{path}: empty file; expected header 'timestamp,value[,label]'")
    header = [cell.strip().lower() for cell in rows[0]]
    if header not in (["timestamp", "value"], ["timestamp", "value", "label"]):
        raise FormatError(
            f"{path}: expected header 'timestamp,value' or 'timestamp,value,label', "
            f"got {','.join(rows[0])!r}"
        )
    if len(rows) == 1:
        raise FormatError(f"{path}: no data rows")
    has_label = len(header) == 3
    timestamps: list[int] = []
    values: list[float] = []
    labels: list[int] = []
    for line_no, row in enumerate(rows[1:], start=2):
        where = f"{path} line {line_no}"
        if len(row) != len(header):
            raise FormatError(f"{where}: expected {len(header)} fields, got {len(row)}")
        timestamps.append(_parse_timestamp(row[0], where))
        values.append(_parse_float(row[1], where, "value"))
        if has_label:
            if row[2].strip() not in ("0", "1"):
                raise FormatError(f"{where}: label must be 0 or 1, got {row[2]!r}")
            labels.append(int(row[2]))
    series = _classify(np.asarray(timestamps, dtype=np.int64), np.asarray(values))
    label_seq = LabelSequence(np.asarray(labels, dtype=np.int8)) if has_label else None
    return series, label_seq


def load_series_csv(path) -> TimeSeries | EventStream:
    """Read ``timestamp,value[,label]`` CSV; pick the container by spacing.

    Spacing is regular when every gap deviates from the modal gap by less
    than 1% of it — that yields a :class:`TimeSeries`; anything else
    (including a single row) is an :class:`EventStream`.  Note the container
    follows the data: an irregular stream that happens to be regular comes
    back as the equivalent TimeSeries.
    """
    return load_labeled_csv(path)[0]


def _classify(timestamps: np.ndarray, values: np.ndarray) -> TimeSeries | EventStream:
    if len(timestamps) < 2:
        return EventStream(timestamps, values)
    gaps = np.diff(timestamps)
    if np.any(gaps < 0):
        bad = int(np.argmax(gaps < 0)) + 2
        raise OrderingError(f"timestamps decrease at data row {bad}")
    uniq, counts = np.unique(gaps, return_counts=True)
    modal = int(uniq[np.argmax(counts)])
    if modal > 0 and np.max(np.abs(gaps - modal)) < 0.01 * modal:
        return TimeSeries(int(timestamps[0]), modal, values)
    return EventStream(timestamps, values)


def write_series_csv(path, series: TimeSeries | EventStream, labels=None) -> Path:
    """Write a series as ``timestamp,value[,label]``; floats keep full precision."""
    path = Path(path)
    timestamps = _timestamps(series)
    values = series.values
    lab = None
    if labels is not None:
        lab = labels.labels if isinstance(labels, LabelSequence) else np.asarray(labels)
        if len(lab) != len(values):
            raise AlignmentError(f"{len(lab)} labels for {len(values)} points")
    with open(path, "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["timestamp", "value"] + (["label"] if lab is not None else []))
        for i in range(len(values)):
            row = [int(timestamps[i]), repr(float(values[i]))]
            if lab is not None:
                row.append(int(lab[i]))
            writer.writerow(row)
    return path


def load_attributes_csv(path) -> tuple[list[str], list[dict[str, str]]]:
    """Read ``series_id,attr1,attr2,...`` rows into per-series attribute dicts."""
    path = Path(path)
    rows = _read_rows(path)
    if not rows:
        raise FormatError(f"{path}: empty file; expected header 'series_id,<attr>,...'")
    header = [cell.strip() for cell in rows[0]]
    if header[0] != "series_id" or len(header) < 2:
        raise FormatError(
            f"{path}: expected header 'series_id,<attr>,...', got {','.join(rows[0])!r}"
        )
    if len(rows) == 1:
        raise FormatError(f"{path}: no data rows")
    names = header[1:]
    ids: list[str] = []
    attributes: list[dict[str, str]] = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise FormatError(f"{path} line {line_no}: expected {len(header)} fields, got {len(row)}")
        sid = row[0].strip()
        if sid in ids:
            raise FormatError(f"{path} line {line_no}: duplicate series_id {sid!r}")
        ids.append(sid)
        attributes.append({name: row[i + 1].strip() for i, name in enumerate(names)})
    return ids, attributes


def load_matrix_csv(path) -> tuple[list[str], np.ndarray]:
    """Read a 0/1 anomaly matrix: ``series_id,<t0>,<t1>,...`` rows."""
    path = Path(path)
    rows = _read_rows(path)
    if not rows:
        raise FormatError(f"{path}: empty file; expected header 'series_id,<t0>,...'")
    header = [cell.strip() for cell in rows[0]]
    if header[0] != "series_id" or len(header) < 2:
        raise FormatError(
            f"{path}: expected header 'series_id,<t0>,...', got {','.join(rows[0])!r}"
        )
    if len(rows) == 1:
        raise FormatError(f"{path}: no data rows")
    ids: list[str] = []
    bits: list[list[int]] = []
    for line_no, row in enumerate(rows[1:], start=2):
        if len(row) != len(header):
            raise FormatError(f"{path} line {line_no}: expected {len(header)} fields, got {len(row)}")
        ids.append(row[0].strip())
        line_bits = []
        for cell in row[1:]:
            if cell.strip() not in ("0", "1"):
                raise FormatError(f"{path} line {line_no}: cells must be 0 or 1, got {cell!r}")
            line_bits.append(int(cell))
        bits.append(line_bits)
    return ids, np.asarray(bits, dtype=np.int8)


def load_covariates_csv(path, target: str | None = None) -> CovariateSet:
    """Read a multi-column regular series: ``timestamp,<col>,<col>,...``.

    ``target`` names the column being scored (default: the first value
    column); every other column becomes a covariate.
    """
    path = Path(path)
    rows = _read_rows(path)
    if not rows:
        raise FormatError(f"{path}: empty file; expected header 'timestamp,<col>,...'")
    header = [cell.strip() for cell in rows[0]]
    if header[0].lower() != "timestamp" or len(header) < 2:
        raise FormatError(
            f"{path}: expected header 'timestamp,<col>,...', got {','.join(rows[0])!r}"
        )
    if len(rows) == 1:
        raise FormatError(f"{path}: no data rows")
    names = header[1:]
    if len(set(names)) != len(names):
        raise FormatError(f"{path}: duplicate column names in header")
    target = target if target is not None else names[0]
    if target not in names:
        raise SchemaError(f"target column {target!r} not in {names}")
    timestamps: list[int] = []
    columns: dict[str, list[float]] = {name: [] for name in names}
    for line_no, row in enumerate(rows[1:], start=2):
        where = f"{path} line {line_no}"
        if len(row) != len(header):
            raise FormatError(f"{where}: expected {len(header)} fields, got {len(row)}")
        timestamps.append(_parse_timestamp(row[0], where))
        for name, cell in zip(names, row[1:]):
            columns[name].append(_parse_float(cell, where, name))
    shaped = _classify(np.asarray(timestamps, dtype=np.int64), np.asarray(columns[target]))
    if not isinstance(shaped, TimeSeries):
        raise InputError(f"{path}: conditional scoring needs a regular grid; resample first")
    covariates = {
        name: shaped.with_values(np.asarray(columns[name]))
        for name in names
        if name != target
    }
    return CovariateSet(target=shaped, covariates=covariates)


# ---------------------------------------------------------------------------
# Experiment runner


@dataclass(frozen=True)
class ExperimentConfig:
    """One fully resolved run: a task plus its merged parameters."""

    task: str
    seed: int = 0
    out: str = "."
    threads: int = 1
    params: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self) -> None:
        if self.task not in TASKS:
            raise SpecError(f"unknown task {self.task!r}; expected one of {TASKS}")
        if not isinstance(self.seed, int) or isinstance(self.seed, bool):
            raise SpecError(f"seed must be an integer, got {self.seed!r}")
        if self.threads < 1:
            raise SpecError("threads must be >= 1")
        object.__setattr__(self, "params", dict(self.params))

    def echo(self) -> dict[str, Any]:
        doc = {"task": self.task, "seed": self.seed, "out": self.out, "threads": self.threads}
        doc.update(self.params)
        return doc


@dataclass(frozen=True)
class RunReport:
    config: Mapping[str, Any]
    environment: Mapping[str, Any]
    records: tuple[Mapping[str, Any], ...]
    timings: Mapping[str, float]


def _jsonable(value):
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in value.items()}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if isinstance(value, np.generic):
        value = value.item()
    if isinstance(value, float) and not np.isfinite(value):
        return None
    return value


def strip_timings(record: Mapping[str, Any]) -> dict[str, Any]:
    """Drop wall-clock keys so two reports of one config compare byte-equal."""
    return {
        key: strip_timings(value) if isinstance(value, Mapping) else value
        for key, value in record.items()
        if key not in TIMING_FIELDS
    }


def run_experiment(config: ExperimentConfig) -> RunReport:
    """Dispatch to the named task and collect its result records."""
    started = time.perf_counter()
    out_dir = Path(config.out)
    out_dir.mkdir(parents=True, exist_ok=True)
    records = _TASK_FUNCS[config.task](config, out_dir)
    environment = {
        "package": "tadkit",
        "version": __version__,
        "numpy": np.__version__,
        "python": platform.python_version(),
        "seed": config.seed,
    }
    return RunReport(
        config=config.echo(),
        environment=environment,
        records=tuple(records),
        timings={"wall_s": time.perf_counter() - started},
    )


def write_report(report: RunReport, out_dir) -> tuple[Path, Path]:
    """Persist ``report.jsonl`` (meta line first) and ``summary.csv``."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    jsonl = out_dir / "report.jsonl"
    with open(jsonl, "w") as handle:
        meta = {
            "record": "meta",
            "config": _jsonable(report.config),
            "environment": _jsonable(report.environment),
            "timings": _jsonable(report.timings),
        }
        handle.write(json.dumps(meta, sort_keys=True) + "\n")
        for record in report.records:
            handle.write(json.dumps(_jsonable(record), sort_keys=True) + "\n")

    summary = out_dir / "summary.csv"
    rows = [
        {k: v for k, v in record.items() if not isinstance(v, (list, tuple, dict))}
        for record in report.records
    ]
    fieldnames: list[str] = []
    for row in rows:
        fieldnames.extend(k for k in row if k not in fieldnames)
    with open(summary, "w", newline="") as handle:
        if rows:
            writer = csv.DictWriter(handle, fieldnames=fieldnames, restval="")
            writer.writeheader()
            for row in rows:
                writer.writerow({k: _jsonable(v) for k, v in row.items()})
    return jsonl, summary


# ---------------------------------------------------------------------------
# Task bodies.  Each returns the result records, already in canonical order.


def _child_seed(base: int, index: int, stream: int) -> int:
    return int(np.random.SeedSequence([base, index, stream]).generate_state(1)[0])


def _detector_config(p: Mapping[str, Any]) -> DetectorConfig:
    window = p["window"]
    if isinstance(window, str) and window != "auto":
        window = int(window)
    return DetectorConfig(
        method=p["method"],
        window=window,
        alpha=p["alpha"],
        n_clusters=p["n_clusters"],
    )


def _threshold_spec(p: Mapping[str, Any], seed: int) -> ThresholdSpec:
    return ThresholdSpec(
        kind=p["threshold_kind"],
        value=p["threshold_value"],
        percentile=p["percentile"],
        k=p["k"],
        up=p["up"],
        down=p["down"],
        horizon=p["horizon"],
        seed=seed,
    )


def _loss_spec(p: Mapping[str, Any]) -> LossSpec:
    return LossSpec(kind=p["loss_kind"], fn_cost=p["fn_cost"], fp_cost=p["fp_cost"])


def _load_regular(path) -> tuple[TimeSeries, LabelSequence | None]:
    series, labels = load_labeled_csv(path)
    if not isinstance(series, TimeSeries):
        raise InputError(f"{path}: this task needs a regular grid; run `tad resample` first")
    return series, labels


def _load_label_file(path, series: TimeSeries) -> LabelSequence:
    path = Path(path)
    rows = _read_rows(path)
    if not rows:
        raise FormatError(f"{path}: empty file; expected header 'timestamp,label'")
    header = [cell.strip().lower() for cell in rows[0]]
    if header != ["timestamp", "label"]:
        raise FormatError(f"{path}: expected header 'timestamp,label', got {','.join(rows[0])!r}")
    stamps: list[int] = []
    bits: list[int] = []
    for line_no, row in enumerate(rows[1:], start=2):
        where = f"{path} line {line_no}"
        if len(row) != 2:
            raise FormatError(f"{where}: expected 2 fields, got {len(row)}")
        stamps.append(_parse_timestamp(row[0], where))
        if row[1].strip() not in ("0", "1"):
            raise FormatError(f"{where}: label must be 0 or 1, got {row[1]!r}")
        bits.append(int(row[1]))
    if len(bits) != len(series) or not np.array_equal(
        np.asarray(stamps, dtype=np.int64), _timestamps(series)
    ):
        raise AlignmentError(
            f"{path}: label timestamps do not match the series grid "
            f"({len(bits)} labels for {len(series)} points)"
        )
    return LabelSequence(np.asarray(bits, dtype=np.int8))


def _resolve_labels(p: Mapping[str, Any], series: TimeSeries, inline: LabelSequence | None) -> LabelSequence:
    if p["labels"] is not None:
        return _load_label_file(p["labels"], series)
    if inline is None:
        raise InputError("labels required: add a label column or pass --labels FILE")
    return inline


def _task_datagen(config: ExperimentConfig, out_dir: Path) -> list[dict]:
    p = config.params
    generator = PeriodicGeneratorConfig(
        seed=config.seed,
        start=p["start"],
        interval=p["interval"],
        fixed_length=p["length"],
        fixed_period=p["period"],
    )
    records = []
    for index in range(p["n_series"]):
        drawn = generate_periodic(generator, index)
        series, labels = drawn.series, drawn.labels
        if p["inject_rate"] > 0.0:
            injected = inject_point_anomalies(
                series,
                InjectionConfig(
                    rate=p["inject_rate"],
                    kind=p["inject_kind"],
                    seed=_child_seed(config.seed, index, 0xEC),
                ),
            )
            series, labels = injected.series, injected.labels
        name = f"series_{index:04d}.csv"
        write_series_csv(out_dir / name, series, labels)
        records.append(
            {
                "record": "series",
                "index": index,
                "file": name,
                "n": len(series),
                "true_period": drawn.true_period,
                "n_anomalies": labels.positive_count,
                "seed": config.seed,
            }
        )
    return records


def _task_resample(config: ExperimentConfig, out_dir: Path) -> list[dict]:
    p = config.params
    if p["input"] is None:
        raise InputError("resample needs --input FILE")
    loaded = load_series_csv(p["input"])
    if isinstance(loaded, TimeSeries):
        keep = ~np.isnan(loaded.values)  # gaps are not events
        events = EventStream(_timestamps(loaded)[keep], loaded.values[keep])
    else:
        events = loaded
    spec = ResampleSpec(
        interval=p["interval"],
        aggregation=p["agg"],
        empty_bin_policy=p["policy"],
        bin_anchor=p["anchor"],
        max_carry_bins=p["max_carry"],
    )
    series = resample(events, spec)
    write_series_csv(out_dir / "resampled.csv", series)
    missing = int(np.isnan(series.values).sum())
    return [
        {
            "record": "resample",
            "file": "resampled.csv",
            "n_events": len(events),
            "n_bins": len(series),
            "missing_bins": missing,
            "start": series.start,
            "interval": series.interval,
            "aggregation": spec.aggregation,
            "policy": spec.empty_bin_policy,
        }
    ]


def _task_detect(config: ExperimentConfig, out_dir: Path) -> list[dict]:
    p = config.params
    if p["input"] is None:
        raise InputError("detect needs --input FILE")
    series, _ = _load_regular(p["input"])
    detector = _detector_config(p)
    spec = _threshold_spec(p, config.seed)
    if p["protocol"] == "streaming":
        scores = run_streaming(detector, series)
        thresholder = Thresholder(spec)
        decisions = np.fromiter(
            (thresholder.update(s) for s in scores.scores), dtype=np.int8, count=len(scores)
        )
    else:
        scores = run_batch(detector, series)
        decisions = apply_batch(spec, scores)
    stamps = _timestamps(series)
    with open(out_dir / "scores.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["timestamp", "score", "decision"])
        for i in range(len(series)):
            writer.writerow([int(stamps[i]), repr(float(scores.scores[i])), int(decisions[i])])
    finite = scores.scores[scores.warmup :]
    return [
        {
            "record": "detect",
            "file": "scores.csv",
            "protocol": p["protocol"],
            "method": detector.method,
            "n": len(series),
            "warmup": scores.warmup,
            "alert_count": int(decisions.sum()),
            "max_score": float(finite.max()) if finite.size else None,
            "seed": config.seed,
        }
    ]


def _eval_record(report, protocol: str, input_path: str) -> dict:
    doc = asdict(report)
    doc["detection_delays"] = list(doc["detection_delays"])
    doc.update({"record": "evaluate", "protocol": protocol, "input": Path(input_path).name})
    return doc


def _task_evaluate(config: ExperimentConfig, out_dir: Path) -> list[dict]:
    p = config.params
    if p["input"] is None:
        raise InputError("evaluate needs --input FILE")
    series, inline = _load_regular(p["input"])
    labels = _resolve_labels(p, series, inline)
    detector = _detector_config(p)
    spec = _threshold_spec(p, config.seed)
    loss = _loss_spec(p)
    if p["protocol"] == "streaming":
        report = evaluate_streaming(detector, spec, series, labels, loss, p["max_delay"])
    else:
        report = evaluate_batch(detector, spec, series, labels, loss, p["max_delay"])
    return [_eval_record(report, p["protocol"], p["input"])]


def _task_hil(config: ExperimentConfig, out_dir: Path) -> list[dict]:
    p = config.params
    if p["input"] is None:
        raise InputError("hil needs --input FILE")
    series, inline = _load_regular(p["input"])
    labels = _resolve_labels(p, series, inline)
    policy = DetectorThresholdPolicy(_detector_config(p), _threshold_spec(p, config.seed))
    report, log = run_hil(policy, series, labels, _loss_spec(p), p["max_delay"])
    record = _eval_record(report, "hil", p["input"])
    record["record"] = "hil"
    records = [record]
    records.extend(
        {"record": "feedback", "t": index, "label": label} for index, label in log.entries
    )
    return records


def _task_bench_period(config: ExperimentConfig, out_dir: Path) -> list[dict]:
    p = config.params
    methods = tuple(m.strip() for m in p["methods"].split(",") if m.strip())
    result = run_period_benchmark(
        n_series=p["n_series"],
        config=PeriodicGeneratorConfig(seed=config.seed),
        methods=methods,
        threads=config.threads,
        random_permutations=p["permutations"],
    )
    return [
        {
            "record": "method",
            "method": row.method,
            "accuracy": row.accuracy,
            "accuracy_within_1": row.accuracy_within_1,
            "mean_runtime_s": row.mean_runtime_s,
            "n_series": result.n_series,
            "seed": result.seed,
        }
        for row in result.results
    ]


def _task_conditional(config: ExperimentConfig, out_dir: Path) -> list[dict]:
    p = config.params
    if p["input"] is None:
        raise InputError("conditional needs --input FILE")
    data = load_covariates_csv(p["input"], p["target"])
    outputs: dict[str, Any] = {}
    if p["mode"] in ("conditional", "both"):
        outputs["conditional"] = run_conditional(
            ConditionalConfig(
                ar_order=p["ar_order"],
                covariate_lags=p["cov_lags"],
                forgetting=p["forgetting"],
                ridge=p["ridge"],
            ),
            data,
        )
    if p["mode"] in ("joint", "both"):
        outputs["joint"] = run_joint(
            JointConfig(forgetting=p["forgetting"], ridge=p["ridge"]), data
        )
    stamps = _timestamps(data.target)
    with open(out_dir / "scores.csv", "w", newline="") as handle:
        writer = csv.writer(handle)
        writer.writerow(["timestamp"] + list(outputs))
        for i in range(len(data)):
            writer.writerow(
                [int(stamps[i])] + [repr(float(seq.scores[i])) for seq in outputs.values()]
            )
    records = []
    for mode, seq in outputs.items():
        finite = seq.scores[seq.warmup :]
        records.append(
            {
                "record": "scores",
                "mode": mode,
                "file": "scores.csv",
                "n": len(seq),
                "warmup": seq.warmup,
                "max_score": float(finite.max()) if finite.size else None,
                "covariates": list(data.names),
            }
        )
    return records


def _rule_record(kind: str, rank: int, rule) -> dict:
    return {
        "record": kind,
        "rank": rank,
        "rule": str(rule),
        "terms": [list(term) for term in rule.terms],
        "score": rule.score,
        "coverage": rule.coverage,
    }


def _task_cohort(config: ExperimentConfig, out_dir: Path) -> list[dict]:
    p = config.params
    if p["matrix"] is None or p["attributes"] is None:
        raise InputError("cohort needs --matrix FILE and --attributes FILE")
    matrix_ids, matrix = load_matrix_csv(p["matrix"])
    attr_ids, attributes = load_attributes_csv(p["attributes"])
    if matrix_ids != attr_ids:
        raise SchemaError(
            "matrix and attribute files disagree on series ids "
            f"({len(matrix_ids)} vs {len(attr_ids)} rows)"
        )
    miner = CohortMinerConfig(
        max_depth=p["max_depth"],
        min_score=p["min_score"],
        quality=p["quality"],
        min_recall=p["min_recall"],
    )
    if p["mode"] == "rules":
        anomalous = matrix.any(axis=1).astype(np.int8)  # flagged anywhere in the window
        rules = mine_rules(anomalous, attributes, miner)
        if p["top"] is not None:
            rules = rules[: p["top"]]
        return [_rule_record("rule", rank, rule) for rank, rule in enumerate(rules, start=1)]
    intervals = mine_rules_over_time(matrix, attributes, miner, p["min_support"])
    records = []
    for rank, interval in enumerate(intervals, start=1):
        record = _rule_record("interval", rank, interval.rule)
        record.update({"start": interval.start, "end": interval.end})
        records.append(record)
    return records


_TASK_FUNCS: dict[str, Callable[[ExperimentConfig, Path], list[dict]]] = {
    "datagen": _task_datagen,
    "resample": _task_resample,
    "detect": _task_detect,
    "evaluate": _task_evaluate,
    "hil": _task_hil,
    "bench-period": _task_bench_period,
    "conditional": _task_conditional,
    "cohort": _task_cohort,
}


# ---------------------------------------------------------------------------
# Click surface

_COMMON_DEFAULTS = {"seed": 0, "out": ".", "threads": 1}

_DETECT_DEFAULTS = {
    "input": None,
    "method": "spectral_residual",
    "window": 128,
    "alpha": 0.1,
    "n_clusters": 4,
    "protocol": "streaming",
    "threshold_kind": "trailing_percentile",
    "threshold_value": 1.0,
    "percentile": 0.999,
    "k": 3.0,
    "up": 1.1,
    "down": 0.98,
    "horizon": None,
}

_EVAL_EXTRAS = {
    "labels": None,
    "loss_kind": "zero_one",
    "fn_cost": 1.0,
    "fp_cost": 1.0,
    "max_delay": 0,
}

_DEFAULTS: dict[str, dict[str, Any]] = {
    "datagen": {
        **_COMMON_DEFAULTS,
        "n_series": 10,
        "length": None,
        "period": None,
        "start": 0,
        "interval": 60,
        "inject_rate": 0.0,
        "inject_kind": "offset",
    },
    "resample": {
        **_COMMON_DEFAULTS,
        "input": None,
        "interval": 3600,
        "agg": "mean",
        "policy": "missing",
        "anchor": 0,
        "max_carry": 5,
    },
    "detect": {**_COMMON_DEFAULTS, **_DETECT_DEFAULTS},
    "evaluate": {**_COMMON_DEFAULTS, **_DETECT_DEFAULTS, **_EVAL_EXTRAS},
    "hil": {**_COMMON_DEFAULTS, **_DETECT_DEFAULTS, **_EVAL_EXTRAS},
    "bench-period": {
        **_COMMON_DEFAULTS,
        "n_series": 1000,
        "methods": ",".join(DEFAULT_METHODS),
        "permutations": 100,
    },
    "conditional": {
        **_COMMON_DEFAULTS,
        "input": None,
        "target": None,
        "mode": "both",
        "ar_order": 2,
        "cov_lags": 0,
        "forgetting": 0.999,
        "ridge": 1e-3,
    },
    "cohort": {
        **_COMMON_DEFAULTS,
        "matrix": None,
        "attributes": None,
        "mode": "rules",
        "max_depth": 2,
        "min_score": 1e-6,
        "quality": "f1",
        "min_recall": 0.5,
        "min_support": 1,
        "top": None,
    },
}


def _merge_params(task: str, config_path: str | None, overrides: Mapping[str, Any]) -> dict:
    merged = dict(_DEFAULTS[task])
    if config_path is not None:
        path = Path(config_path)
        if not path.is_file():
            raise InputError(f"config file not found: {path}")
        with open(path) as handle:
            try:
                doc = json.load(handle)
            except json.JSONDecodeError as err:
                raise FormatError(f"{path}: invalid JSON config ({err})") from None
        if not isinstance(doc, dict):
            raise FormatError(f"{path}: config must be a JSON object")
        declared = doc.pop("task", task)
        if declared != task:
            raise SpecError(f"config is for task {declared!r}, not {task!r}")
        unknown = sorted(set(doc) - set(merged))
        if unknown:
            raise SpecError(f"unknown config keys for {task}: {unknown}")
        merged.update(doc)
    merged.update({k: v for k, v in overrides.items() if v is not None})
    return merged


def _emit_error(task: str, err: Exception) -> None:
    module = "cli"
    trace = err.__traceback__
    while trace is not None:
        name = trace.tb_frame.f_globals.get("__name__", "")
        if name.startswith("tadkit.") and name != "tadkit.cli":
            module = name.split(".", 1)[1]
        trace = trace.tb_next
    payload = {
        "error": type(err).__name__,
        "task": task,
        "module": module,
        "message": str(err),
    }
    click.echo(json.dumps(payload, sort_keys=True), err=True)
    raise SystemExit(2)


def _execute(task: str, config_path: str | None, overrides: dict) -> None:
    try:
        params = _merge_params(task, config_path, overrides)
        config = ExperimentConfig(
            task=task,
            seed=params.pop("seed"),
            out=params.pop("out"),
            threads=params.pop("threads"),
            params=params,
        )
        report = run_experiment(config)
        jsonl, summary = write_report(report, config.out)
    except (TadError, OSError) as err:
        _emit_error(task, err)
        return
    click.echo(f"{task}: {len(report.records)} records -> {jsonl} and {summary}")
    for record in report.records:
        if record.get("record") == "method":
            click.echo(
                f"  {record['method']:>11s}  accuracy {record['accuracy']:.3f}  "
                f"mean runtime {record['mean_runtime_s'] * 1e3:.3f} ms"
            )


def _common_options(fn):
    fn = click.option("--config", type=click.Path(), default=None, help="JSON config; flags override it.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Base RNG seed.")(fn)
    fn = click.option("--out", type=click.Path(), default=None, help="Output directory.")(fn)
    fn = click.option("--threads", type=int, default=None, help="Worker processes.")(fn)
    return fn


def _detector_options(fn):
    fn = click.option("--input", type=click.Path(), default=None, help="Input series CSV.")(fn)
    fn = click.option("--method", type=click.Choice(["spectral_residual", "ewma_residual", "left_discord", "kmeans_window"]), default=None)(fn)
    fn = click.option("--window", default=None, help="Window length, or 'auto'.")(fn)
    fn = click.option("--alpha", type=float, default=None, help="EWMA smoothing factor.")(fn)
    fn = click.option("--n-clusters", type=int, default=None)(fn)
    fn = click.option("--protocol", type=click.Choice(["streaming", "batch"]), default=None)(fn)
    fn = click.option("--threshold-kind", type=click.Choice(["fixed_value", "trailing_percentile", "k_sigma", "feedback_adaptive"]), default=None)(fn)
    fn = click.option("--threshold-value", type=float, default=None)(fn)
    fn = click.option("--percentile", type=float, default=None)(fn)
    fn = click.option("--k", type=float, default=None)(fn)
    fn = click.option("--up", type=float, default=None)(fn)
    fn = click.option("--down", type=float, default=None)(fn)
    fn = click.option("--horizon", type=int, default=None)(fn)
    return fn


def _label_options(fn):
    fn = click.option("--labels", type=click.Path(), default=None, help="Separate timestamp,label CSV.")(fn)
    fn = click.option("--loss-kind", type=click.Choice(["zero_one", "weighted"]), default=None)(fn)
    fn = click.option("--fn-cost", type=float, default=None)(fn)
    fn = click.option("--fp-cost", type=float, default=None)(fn)
    fn = click.option("--max-delay", type=int, default=None)(fn)
    return fn


@click.group()
@click.version_option(version=__version__, prog_name="tad")
def main() -> None:
    """Streaming anomaly detection toolkit."""


@main.command("datagen")
@_common_options
@click.option("--n-series", type=int, default=None)
@click.option("--length", type=int, default=None, help="Pin every series to this length.")
@click.option("--period", type=int, default=None, help="Pin every series to this period.")
@click.option("--start", type=int, default=None)
@click.option("--interval", type=int, default=None)
@click.option("--inject-rate", type=float, default=None, help="Point-anomaly rate.")
@click.option("--inject-kind", type=click.Choice(["offset", "uniform", "constant"]), default=None)
def _cmd_datagen(config, **flags):
    """Write seeded synthetic periodic series as CSV files."""
    _execute("datagen", config, flags)


@main.command("resample")
@_common_options
@click.option("--input", type=click.Path(), default=None, help="Input series or event CSV.")
@click.option("--interval", type=int, default=None, help="Bin width in seconds.")
@click.option("--agg", type=click.Choice(["mean", "sum", "count", "min", "max", "last"]), default=None)
@click.option("--policy", type=click.Choice(["missing", "zero", "carry_forward"]), default=None)
@click.option("--anchor", type=int, default=None, help="Grid anchor (epoch seconds).")
@click.option("--max-carry", type=int, default=None)
def _cmd_resample(config, **flags):
    """Aggregate events onto a regular grid."""
    _execute("resample", config, flags)


@main.command("detect")
@_common_options
@_detector_options
def _cmd_detect(config, **flags):
    """Score a series and emit alert decisions."""
    _execute("detect", config, flags)


@main.command("evaluate")
@_common_options
@_detector_options
@_label_options
def _cmd_evaluate(config, **flags):
    """Score a labeled series and report precision/recall/regret."""
    _execute("evaluate", config, flags)


@main.command("hil")
@_common_options
@_detector_options
@_label_options
def _cmd_hil(config, **flags):
    """Run the interactive loop: labels revealed only for flagged points."""
    _execute("hil", config, flags)


@main.command("bench-period")
@_common_options
@click.option("--n-series", type=int, default=None)
@click.option("--methods", default=None, help="Comma-separated subset of: " + ",".join(DEFAULT_METHODS))
@click.option("--permutations", type=int, default=None, help="Shuffles for the random baseline.")
def _cmd_bench_period(config, **flags):
    """Accuracy/runtime table for the period-detection methods."""
    _execute("bench-period", config, flags)


@main.command("conditional")
@_common_options
@click.option("--input", type=click.Path(), default=None, help="Multi-column timestamp,<col>,... CSV.")
@click.option("--target", default=None, help="Column to score (default: first).")
@click.option("--mode", type=click.Choice(["conditional", "joint", "both"]), default=None)
@click.option("--ar-order", type=int, default=None)
@click.option("--cov-lags", type=int, default=None)
@click.option("--forgetting", type=float, default=None)
@click.option("--ridge", type=float, default=None)
def _cmd_conditional(config, **flags):
    """Covariate-conditioned vs joint multivariate anomaly scores."""
    _execute("conditional", config, flags)


@main.command("cohort")
@_common_options
@click.option("--matrix", type=click.Path(), default=None, help="series_id,<t>,... 0/1 CSV.")
@click.option("--attributes", type=click.Path(), default=None, help="series_id,<attr>,... CSV.")
@click.option("--mode", type=click.Choice(["rules", "timeline"]), default=None)
@click.option("--max-depth", type=int, default=None)
@click.option("--min-score", type=float, default=None)
@click.option("--quality", type=click.Choice(["f1", "precision_at_min_recall"]), default=None)
@click.option("--min-recall", type=float, default=None)
@click.option("--min-support", type=int, default=None)
@click.option("--top", type=int, default=None, help="Keep only the best N rules.")
def _cmd_cohort(config, **flags):
    """Mine attribute rules that explain which series are anomalous."""
    _execute("cohort", config, flags)


if __name__ == "__main__":
    main()
