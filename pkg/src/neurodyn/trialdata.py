"""Trial-aligned multichannel time series and their CSV interchange formats.

A :class:`TrialSet` is a ``(trial, timestep, channel)`` block of float64
values.  Two CSV layouts are supported:

``csv_wide``
    ``trial,timestep,<ch1>,...,<chC>`` -- one row per (trial, timestep).
``csv_long``
    ``trial,timestep,channel,value`` -- one row per cell.

Channel kinds/units and the sample rate do not fit in either layout, so
:func:`save_trialset` also writes a small JSON sidecar (``<path>.meta.json``).
:func:`load_trialset` reads it when present and otherwise falls back to the
``sample_rate_hz`` argument and kind ``other``.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import (
    DuplicateCell,
    IoFailure,
    MissingColumn,
    NonFiniteValue,
    RaggedTrials,
    UnknownChannel,
    ValidationError,
)

FORMATS = ("csv_wide", "csv_long")


class ChannelKind(str, Enum):
    JOINT_ANGLE = "joint_angle"
    JOINT_VELOCITY = "joint_velocity"
    MUSCLE_ACTIVATION = "muscle_activation"
    EMG_ENVELOPE = "emg_envelope"
    RAW_EMG = "raw_emg"
    LATENT = "latent"
    OTHER = "other"


@dataclass(frozen=True)
class ChannelSpec:
    name: str
    kind: ChannelKind = ChannelKind.OTHER
    units: str = ""

    def __post_init__(self):
        if not self.name:
            raise ValidationError("channel name must be nonempty")
        object.__setattr__(self, "kind", ChannelKind(self.kind))


@dataclass(frozen=True, eq=False)
class TrialSet:
    """Immutable ``(T, N, C)`` block of trial-aligned samples.

    Parameters
    ----------
    data : array_like, shape (T, N, C)
        Values; copied to a read-only float64 array.
    channels : sequence of ChannelSpec or str
        One entry per channel; bare strings become kind ``other``.
    sample_rate_hz : float
        Sampling rate shared by all trials.
    """

    data: np.ndarray
    channels: tuple = field(default=())
    sample_rate_hz: float = 1.0

    def __post_init__(self):
        data = np.array(self.data, dtype=np.float64, copy=True)
        if data.ndim != 3:
            raise ValidationError(f"TrialSet data must be 3-D, got shape {data.shape}")
        chans = tuple(c if isinstance(c, ChannelSpec) else ChannelSpec(str(c)) for c in self.channels)
        if len(chans) != data.shape[2]:
            raise ValidationError(
                f"{len(chans)} channel specs for {data.shape[2]} data channels"
            )
        names = [c.name for c in chans]
        if len(set(names)) != len(names):
            raise ValidationError(f"duplicate channel names in {names}")
        rate = float(self.sample_rate_hz)
        if not (math.isfinite(rate) and rate > 0):
            raise ValidationError(f"sample_rate_hz must be positive, got {self.sample_rate_hz}")
        if not np.all(np.isfinite(data)):
            raise NonFiniteValue("TrialSet contains NaN or Inf values")
        data.setflags(write=False)
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "channels", chans)
        object.__setattr__(self, "sample_rate_hz", rate)

    @property
    def shape(self) -> tuple[int, int, int]:
        return self.data.shape

    @property
    def n_trials(self) -> int:
        return self.data.shape[0]

    @property
    def n_timesteps(self) -> int:
        return self.data.shape[1]

    @property
    def channel_names(self) -> list[str]:
        return [c.name for c in self.channels]

    def channel_index(self, name: str) -> int:
        try:
            return self.channel_names.index(name)
        except ValueError:
            raise UnknownChannel(f"unknown channel {name!r}; have {self.channel_names}") from None

    def channel(self, name: str) -> np.ndarray:
        """Return the ``(T, N)`` values of one channel."""
        return self.data[:, :, self.channel_index(name)]

    def trial(self, index: int) -> "TrialSlice":
        return TrialSlice(self.data[index], self.channels, self.sample_rate_hz)

    def __iter__(self):
        for t in range(self.n_trials):
            yield self.trial(t)

    def __len__(self):
        return self.n_trials

    def __eq__(self, other):
        if not isinstance(other, TrialSet):
            return NotImplemented
        return (
            self.channels == other.channels
            and self.sample_rate_hz == other.sample_rate_hz
            and self.data.shape == other.data.shape
            and bool(np.array_equal(self.data, other.data))
        )

    __hash__ = None

    def __repr__(self):
        return (
            f"TrialSet(shape={self.shape}, channels={self.channel_names}, "
            f"sample_rate_hz={self.sample_rate_hz})"
        )

    def replace(self, data=None, channels=None, sample_rate_hz=None) -> "TrialSet":
        return TrialSet(
            self.data if data is None else data,
            self.channels if channels is None else channels,
            self.sample_rate_hz if sample_rate_hz is None else sample_rate_hz,
        )


@dataclass(frozen=True)
class TrialSlice:
    """One trial: ``(N, C)`` values with the parent's channels and rate."""

    data: np.ndarray
    channels: tuple
    sample_rate_hz: float

    def channel(self, name: str) -> np.ndarray:
        names = [c.name for c in self.channels]
        if name not in names:
            raise UnknownChannel(f"unknown channel {name!r}")
        return self.data[:, names.index(name)]


def select_channels(ts: TrialSet, names: Sequence[str]) -> TrialSet:
    """Project/permute channels; output order follows ``names``."""
    idx = [ts.channel_index(n) for n in names]
    return TrialSet(ts.data[:, :, idx], [ts.channels[i] for i in idx], ts.sample_rate_hz)


def concat_channels(sets: Iterable[TrialSet]) -> TrialSet:
    """Stack channels of several same-shaped trial sets side by side."""
    sets = list(sets)
    if not sets:
        raise ValidationError("nothing to concatenate")
    first = sets[0]
    for s in sets[1:]:
        if s.shape[:2] != first.shape[:2]:
            raise RaggedTrials(f"cannot merge shapes {first.shape} and {s.shape}")
        if s.sample_rate_hz != first.sample_rate_hz:
            raise ValidationError("cannot merge trial sets with different sample rates")
    data = np.concatenate([s.data for s in sets], axis=2)
    channels = [c for s in sets for c in s.channels]
    return TrialSet(data, channels, first.sample_rate_hz)


# ---------------------------------------------------------------------------
# CSV I/O


def _meta_path(path: Path) -> Path:
    return path.with_name(path.name + ".meta.json")


def _fmt(x: float) -> str:
    # repr is the shortest string that round-trips exactly
    return repr(float(x))


def save_trialset(ts: TrialSet, path, format: str = "csv_wide") -> None:
    """Write ``ts`` to ``path`` plus its ``.meta.json`` sidecar."""
    path = Path(path)
    if format not in FORMATS:
        raise ValidationError(f"unknown format {format!r}; expected one of {FORMATS}")
    T, N, C = ts.shape
    lines = []
    if format == "csv_wide":
        lines.append(",".join(["trial", "timestep", *ts.channel_names]))
        for t in range(T):
            block = ts.data[t]
            for n in range(N):
                lines.append(f"{t},{n}," + ",".join(map(_fmt, block[n])))
    else:
        lines.append("trial,timestep,channel,value")
        names = ts.channel_names
        for t in range(T):
            block = ts.data[t]
            for n in range(N):
                for c in range(C):
                    lines.append(f"{t},{n},{names[c]},{_fmt(block[n, c])}")
    meta = {
        "format": format,
        "sample_rate_hz": ts.sample_rate_hz,
        "channels": [
            {"name": c.name, "kind": c.kind.value, "units": c.units} for c in ts.channels
        ],
    }
    try:
        with open(path, "w", encoding="utf-8", newline="") as fh:
            fh.write("\n".join(lines))
            fh.write("\n")
        with open(_meta_path(path), "w", encoding="utf-8") as fh:
            json.dump(meta, fh, indent=2)
            fh.write("\n")
    except OSError as exc:
        raise IoFailure(f"cannot write {path}: {exc}") from exc


def _read_meta(path: Path):
    mp = _meta_path(path)
    if not mp.exists():
        return None
    try:
        with open(mp, encoding="utf-8") as fh:
            return json.load(fh)
    except (OSError, json.JSONDecodeError) as exc:
        raise IoFailure(f"cannot read metadata {mp}: {exc}") from exc


def _parse_float(text: str, where: str) -> float:
    try:
        v = float(text)
    except ValueError:
        raise ValidationError(f"{where}: cannot parse {text!r} as a number") from None
    if not math.isfinite(v):
        raise NonFiniteValue(f"{where}: non-finite value {text!r}")
    return v


def _parse_int(text: str, where: str) -> int:
    try:
        return int(text)
    except ValueError:
        try:
            f = float(text)
        except ValueError:
            raise ValidationError(f"{where}: cannot parse {text!r} as an integer") from None
        if not f.is_integer():
            raise ValidationError(f"{where}: {text!r} is not an integer index")
        return int(f)


def load_trialset(path, format: str = "csv_wide", sample_rate_hz: float | None = None) -> TrialSet:
    """Read and validate a trial set.

    ``sample_rate_hz`` overrides the sidecar value; without either the
    rate defaults to 1.0.
    """
    path = Path(path)
    if format not in FORMATS:
        raise ValidationError(f"unknown format {format!r}; expected one of {FORMATS}")
    try:
        fh = open(path, encoding="utf-8", newline="")
    except OSError as exc:
        raise IoFailure(f"cannot read {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise MissingColumn(f"{path}: empty file, header row required") from None
        header = [h.strip() for h in header]
        rows = list(reader)

    meta = _read_meta(path)
    if format == "csv_wide":
        data, names = _parse_wide(path, header, rows)
    else:
        data, names = _parse_long(path, header, rows, meta)

    channels = [ChannelSpec(n) for n in names]
    rate = 1.0
    if meta is not None:
        specs = {m["name"]: m for m in meta.get("channels", [])}
        channels = [
            ChannelSpec(n, specs[n].get("kind", "other"), specs[n].get("units", ""))
            if n in specs
            else ChannelSpec(n)
            for n in names
        ]
        rate = float(meta.get("sample_rate_hz", rate))
    if sample_rate_hz is not None:
        rate = float(sample_rate_hz)
    return TrialSet(data, channels, rate)


def _assemble(path, cells: dict, trials: list[int], steps_by_trial: dict, n_channels: int):
    if not trials:
        return np.zeros((0, 0, n_channels))
    lengths = {len(steps_by_trial[t]) for t in trials}
    if len(lengths) != 1:
        raise RaggedTrials(f"{path}: trials have unequal lengths {sorted(lengths)}")
    (N,) = lengths
    for t in trials:
        steps = steps_by_trial[t]
        if min(steps) != 0 or max(steps) != N - 1:
            raise RaggedTrials(f"{path}: trial {t} timesteps are not contiguous from 0")
    data = np.empty((len(trials), N, n_channels))
    for i, t in enumerate(trials):
        data[i] = cells[t]
    return data


def _parse_wide(path, header, rows):
    if len(header) < 2 or header[0] != "trial" or header[1] != "timestep":
        raise MissingColumn(f"{path}: csv_wide header must start with 'trial,timestep'")
    names = header[2:]
    if len(set(names)) != len(names) or any(not n for n in names):
        raise ValidationError(f"{path}: channel names must be nonempty and unique")
    C = len(names)
    by_trial: dict[int, dict[int, list[float]]] = {}
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        where = f"{path}:{lineno}"
        if len(row) != C + 2:
            raise MissingColumn(f"{where}: expected {C + 2} columns, got {len(row)}")
        t = _parse_int(row[0], where)
        n = _parse_int(row[1], where)
        vals = [_parse_float(v, where) for v in row[2:]]
        steps = by_trial.setdefault(t, {})
        if n in steps:
            raise DuplicateCell(f"{where}: duplicate row for trial {t}, timestep {n}")
        steps[n] = vals
    trials = sorted(by_trial)
    cells = {}
    for t in trials:
        steps = by_trial[t]
        cells[t] = np.array([steps[n] for n in sorted(steps)], dtype=np.float64).reshape(len(steps), C)
    return _assemble(path, cells, trials, {t: list(by_trial[t]) for t in trials}, C), names


def _parse_long(path, header, rows, meta):
    required = ["trial", "timestep", "channel", "value"]
    missing = [c for c in required if c not in header]
    if missing:
        raise MissingColumn(f"{path}: missing columns {missing}")
    it, istep, ich, ival = (header.index(c) for c in required)
    names: list[str] = []
    if meta is not None:
        names = [m["name"] for m in meta.get("channels", [])]
    seen_names = set(names)
    cells: dict[tuple[int, int, str], float] = {}
    for lineno, row in enumerate(rows, start=2):
        if not row:
            continue
        where = f"{path}:{lineno}"
        if len(row) != len(header):
            raise MissingColumn(f"{where}: expected {len(header)} columns, got {len(row)}")
        key = (_parse_int(row[it], where), _parse_int(row[istep], where), row[ich].strip())
        if not key[2]:
            raise ValidationError(f"{where}: empty channel name")
        if key in cells:
            raise DuplicateCell(f"{where}: duplicate cell {key}")
        cells[key] = _parse_float(row[ival], where)
        if key[2] not in seen_names:
            seen_names.add(key[2])
            names.append(key[2])
    C = len(names)
    col = {n: i for i, n in enumerate(names)}
    by_trial: dict[int, dict[int, np.ndarray]] = {}
    filled: dict[int, dict[int, int]] = {}
    for (t, n, ch), v in cells.items():
        row = by_trial.setdefault(t, {}).setdefault(n, np.full(C, np.nan))
        row[col[ch]] = v
        filled.setdefault(t, {}).setdefault(n, 0)
        filled[t][n] += 1
    trials = sorted(by_trial)
    for t in trials:
        for n, k in filled[t].items():
            if k != C:
                raise RaggedTrials(f"{path}: trial {t} timestep {n} has {k} of {C} channels")
    out = {t: np.array([by_trial[t][n] for n in sorted(by_trial[t])]).reshape(-1, C) for t in trials}
    return _assemble(path, out, trials, {t: list(by_trial[t]) for t in trials}, C), names
