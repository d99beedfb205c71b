import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from neurodyn.errors import (
    DuplicateCell,
    MissingColumn,
    NonFiniteValue,
    RaggedTrials,
    UnknownChannel,
    ValidationError,
)
from neurodyn.trialdata import ChannelKind, TrialSet, load_trialset, save_trialset, select_channels


def test_long_format_shape(tmp_path):
    path = tmp_path / "long.csv"
    rows = ["trial,timestep,channel,value"]
    for t in range(2):
        for n in range(3):
            rows.append(f"{t},{n},emg,{t * 10 + n}")
    path.write_text("\n".join(rows) + "\n")
    ts = load_trialset(path, "csv_long")
    assert ts.shape == (2, 3, 1)
    assert ts.data[1, 2, 0] == 12.0


def test_wide_format_sixty_steps(tmp_path):
    path = tmp_path / "wide.csv"
    lines = ["trial,timestep,biceps,triceps"]
    for t in range(2):
        for n in range(60):
            lines.append(f"{t},{n},{n / 60},{1 - n / 60}")
    path.write_text("\n".join(lines) + "\n")
    ts = load_trialset(path, "csv_wide")
    assert ts.shape == (2, 60, 2)
    assert ts.channel_names == ["biceps", "triceps"]


def test_trials_sorted_and_rows_unordered(tmp_path):
    path = tmp_path / "wide.csv"
    path.write_text("trial,timestep,x\n5,1,51\n2,0,20\n5,0,50\n2,1,21\n")
    ts = load_trialset(path)
    np.testing.assert_array_equal(ts.data[:, :, 0], [[20, 21], [50, 51]])


@pytest.mark.parametrize("cell", ["nan", "inf", "-Infinity"])
def test_nonfinite_rejected(tmp_path, cell):
    path = tmp_path / "bad.csv"
    path.write_text(f"trial,timestep,x\n0,0,1.0\n0,1,{cell}\n")
    with pytest.raises(NonFiniteValue):
        load_trialset(path)


def test_missing_columns(tmp_path):
    path = tmp_path / "bad.csv"
    path.write_text("trial,channel,value\n0,x,1\n")
    with pytest.raises(MissingColumn):
        load_trialset(path, "csv_long")
    path.write_text("time,x\n0,1\n")
    with pytest.raises(MissingColumn):
        load_trialset(path, "csv_wide")


def test_duplicate_cell(tmp_path):
    path = tmp_path / "dup.csv"
    path.write_text("trial,timestep,channel,value\n0,0,x,1\n0,0,x,2\n")
    with pytest.raises(DuplicateCell):
        load_trialset(path, "csv_long")


def test_noncontiguous_timesteps(tmp_path):
    path = tmp_path / "gap.csv"
    path.write_text("trial,timestep,x\n0,0,1\n0,2,1\n")
    with pytest.raises(RaggedTrials):
        load_trialset(path)


@pytest.mark.parametrize("fmt", ["csv_wide", "csv_long"])
def test_round_trip(tmp_path, small_set, fmt):
    path = tmp_path / "rt.csv"
    save_trialset(small_set, path, fmt)
    back = load_trialset(path, fmt)
    assert back == small_set
    assert back.channels[0].kind is ChannelKind.EMG_ENVELOPE
    assert back.sample_rate_hz == 200.0


@pytest.mark.parametrize("fmt", ["csv_wide", "csv_long"])
def test_round_trip_empty(tmp_path, fmt):
    empty = TrialSet(np.zeros((0, 0, 2)), ["a", "b"], 10.0)
    path = tmp_path / "empty.csv"
    save_trialset(empty, path, fmt)
    back = load_trialset(path, fmt)
    assert back.n_trials == 0
    assert back.channel_names == ["a", "b"]


def test_wide_row_count(tmp_path):
    ts = TrialSet(np.random.default_rng(0).random((46, 60, 2)), ["biceps", "triceps"], 200.0)
    path = tmp_path / "big.csv"
    save_trialset(ts, path)
    lines = path.read_text().splitlines()
    assert len(lines) - 1 == 46 * 60


def test_sample_rate_override(tmp_path, small_set):
    path = tmp_path / "rt.csv"
    save_trialset(small_set, path)
    assert load_trialset(path, sample_rate_hz=30000).sample_rate_hz == 30000.0


def test_select_channels(small_set):
    swapped = select_channels(small_set, ["triceps", "biceps"])
    assert swapped.channel_names == ["triceps", "biceps"]
    np.testing.assert_array_equal(swapped.data[:, :, 0], small_set.data[:, :, 1])
    assert select_channels(small_set, ["biceps", "triceps"]) == small_set
    with pytest.raises(UnknownChannel):
        select_channels(small_set, ["wrist"])


def test_select_composition(small_set):
    names = ["triceps", "biceps"]
    twice = select_channels(select_channels(small_set, names), ["biceps"])
    assert twice == select_channels(small_set, ["biceps"])


def test_invariants():
    with pytest.raises(ValidationError):
        TrialSet(np.zeros((1, 2, 2)), ["a", "a"])
    with pytest.raises(ValidationError):
        TrialSet(np.zeros((1, 2, 1)), ["a"], 0.0)
    with pytest.raises(NonFiniteValue):
        TrialSet(np.full((1, 2, 1), np.nan), ["a"])
    ts = TrialSet(np.zeros((1, 2, 1)), ["a"])
    with pytest.raises(ValueError):
        ts.data[0, 0, 0] = 1.0


@settings(max_examples=40, deadline=None)
@given(st.lists(st.integers(1, 6), min_size=2, max_size=5).filter(lambda ls: len(set(ls)) > 1))
def test_ragged_always_rejected(tmp_path_factory, lengths):
    path = tmp_path_factory.mktemp("ragged") / "r.csv"
    lines = ["trial,timestep,x"]
    for t, n in enumerate(lengths):
        lines += [f"{t},{i},{i}" for i in range(n)]
    path.write_text("\n".join(lines) + "\n")
    with pytest.raises(RaggedTrials):
        load_trialset(path)


@settings(max_examples=30, deadline=None)
@given(
    st.integers(0, 3),
    st.integers(1, 5),
    st.integers(1, 3),
    st.sampled_from(["csv_wide", "csv_long"]),
    st.data(),
)
def test_round_trip_property(tmp_path_factory, T, N, C, fmt, data):
    vals = data.draw(
        st.lists(
            st.floats(allow_nan=False, allow_infinity=False, width=64),
            min_size=T * N * C,
            max_size=T * N * C,
        )
    )
    arr = np.array(vals, dtype=float).reshape(T, N, C) if T else np.zeros((0, 0, C))
    ts = TrialSet(arr, [f"c{i}" for i in range(C)], 200.0)
    path = tmp_path_factory.mktemp("rt") / "x.csv"
    save_trialset(ts, path, fmt)
    assert load_trialset(path, fmt) == ts
