import numpy as np
import pytest
from hypothesis import given, strategies as st

from tadkit.core import (
    MISSING,
    AlignmentError,
    CovariateSet,
    EventStream,
    InputError,
    LabelSequence,
    OrderingError,
    PopulationDataset,
    SchemaError,
    ScoreSequence,
    SpecError,
    TimeSeries,
    align,
    is_missing,
    slice_prefix,
)


def test_time_series_basics():
    ts = TimeSeries(100, 60, np.array([1.0, 2.0, 3.0]))
    assert len(ts) == 3
    assert ts.end == 100 + 3 * 60
    assert ts.timestamps().tolist() == [100, 160, 220]
    assert ts.timestamp_at(0) == 100
    assert ts.timestamp_at(-1) == 220
    with pytest.raises(IndexError):
        ts.timestamp_at(3)


def test_time_series_rejects_bad_interval():
    with pytest.raises(SpecError):
        TimeSeries(0, 0, np.array([1.0]))
    with pytest.raises(SpecError):
        TimeSeries(0, -60, np.array([1.0]))


def test_time_series_values_are_read_only():
    ts = TimeSeries(0, 1, np.array([1.0, 2.0]))
    with pytest.raises(ValueError):
        ts.values[0] = 9.0


def test_time_series_missing_sentinel():
    ts = TimeSeries(0, 1, np.array([1.0, MISSING, 3.0]))
    assert ts.has_missing
    assert is_missing(ts.values[1])
    assert not is_missing(ts.values[0])


def test_time_series_rejects_inf():
    with pytest.raises(InputError):
        TimeSeries(0, 1, np.array([1.0, np.inf]))


def test_with_values_keeps_grid():
    ts = TimeSeries(7, 5, np.array([1.0, 2.0]))
    other = ts.with_values(np.array([3.0, 4.0]))
    assert other.start == 7 and other.interval == 5
    assert other.values.tolist() == [3.0, 4.0]


def test_label_sequence_validation():
    labels = LabelSequence(np.array([0, 1, 1, 0]))
    assert labels.positive_count == 2
    with pytest.raises(InputError):
        LabelSequence(np.array([0, 2]))


def test_score_sequence_warmup_discipline():
    ScoreSequence(np.array([np.nan, np.nan, 1.0]), warmup=2)
    with pytest.raises(InputError):
        # finite value inside the declared warmup
        ScoreSequence(np.array([0.0, np.nan, 1.0]), warmup=2)
    with pytest.raises(InputError):
        # sentinel after the warmup
        ScoreSequence(np.array([np.nan, 1.0, np.nan]), warmup=1)
    with pytest.raises(SpecError):
        ScoreSequence(np.array([1.0]), warmup=2)


def test_score_sequence_valid_slice():
    seq = ScoreSequence(np.array([np.nan, 2.0, 3.0]), warmup=1)
    assert seq.valid.tolist() == [2.0, 3.0]


def test_event_stream_ordering():
    EventStream(np.array([0, 0, 5]), np.array([1.0, 2.0, 3.0]))  # ties are fine
    with pytest.raises(OrderingError, match="position 2"):
        EventStream(np.array([0, 5, 3]), np.array([1.0, 2.0, 3.0]))


def test_event_stream_rejects_fractional_timestamps():
    with pytest.raises(InputError):
        EventStream(np.array([0.5, 1.0]), np.array([1.0, 2.0]))


def test_event_stream_rejects_nan_values():
    with pytest.raises(InputError):
        EventStream(np.array([0, 1]), np.array([1.0, np.nan]))


def test_event_stream_from_pairs_round_trip():
    ev = EventStream.from_pairs([(0, 1.5), (10, -2.0)])
    assert list(ev) == [(0, 1.5), (10, -2.0)]
    assert EventStream.from_pairs([]) == EventStream(np.array([], int), np.array([]))


def test_population_requires_shared_grid_and_schema():
    a = TimeSeries(0, 60, np.zeros(5))
    b = TimeSeries(0, 60, np.zeros(5))
    pop = PopulationDataset((a, b), ({"region": "x"}, {"region": "y"}))
    assert pop.n_series == 2 and pop.n_points == 5
    assert pop.schema == ("region",)
    with pytest.raises(AlignmentError):
        PopulationDataset((a, TimeSeries(60, 60, np.zeros(5))), ({}, {}))
    with pytest.raises(SchemaError):
        PopulationDataset((a, b), ({"region": "x"}, {"device": "y"}))


def test_covariate_set_grid_check():
    target = TimeSeries(0, 60, np.zeros(4))
    good = CovariateSet(target, {"temp": TimeSeries(0, 60, np.ones(4))})
    assert good.names == ("temp",)
    with pytest.raises(AlignmentError):
        CovariateSet(target, {"temp": TimeSeries(0, 30, np.ones(4))})


def test_slice_prefix_bounds():
    ts = TimeSeries(0, 1, np.arange(5, dtype=float))
    assert len(slice_prefix(ts, 0)) == 0
    assert slice_prefix(ts, 5) == ts
    assert slice_prefix(ts, 3).values.tolist() == [0.0, 1.0, 2.0]
    with pytest.raises(IndexError):
        slice_prefix(ts, 6)


@given(st.integers(min_value=0, max_value=20))
def test_slice_prefix_idempotent(t):
    ts = TimeSeries(0, 2, np.arange(20, dtype=float))
    once = slice_prefix(ts, t)
    assert slice_prefix(once, t) == once


def test_align_trims_to_overlap():
    a = TimeSeries(0, 10, np.arange(6, dtype=float))     # covers [0, 60)
    b = TimeSeries(20, 10, np.arange(6, dtype=float))    # covers [20, 80)
    ta, tb = align([a, b])
    assert ta.start == tb.start == 20
    assert len(ta) == len(tb) == 4
    assert ta.values.tolist() == [2.0, 3.0, 4.0, 5.0]
    assert tb.values.tolist() == [0.0, 1.0, 2.0, 3.0]


def test_align_idempotent_on_aligned_inputs():
    a = TimeSeries(0, 10, np.arange(6, dtype=float))
    b = TimeSeries(20, 10, np.arange(6, dtype=float))
    first = align([a, b])
    assert align(first) == first


def test_align_errors():
    a = TimeSeries(0, 10, np.arange(3, dtype=float))
    with pytest.raises(AlignmentError):
        align([a, TimeSeries(0, 5, np.arange(3, dtype=float))])
    with pytest.raises(AlignmentError):
        align([a, TimeSeries(3, 10, np.arange(3, dtype=float))])  # off-grid start
    with pytest.raises(AlignmentError):
        align([a, TimeSeries(100, 10, np.arange(3, dtype=float))])  # disjoint
