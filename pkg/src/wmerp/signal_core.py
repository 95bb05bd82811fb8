"""Recordings, montages, events and epochs, plus the on-disk recording format.

A recording on disk is a triple sharing one base path::

    base.erph         text header, ``key:value`` lines
    base.erpd         float32 little-endian samples, channel-major
    base.events.csv   sample_index,task,condition,response,rt_ms

Samples are held as float64 in memory and stored as float32, so a round trip
is exact for any data that is already float32-representable.
"""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass, replace
from pathlib import Path
from typing import Iterable, Optional, Sequence

import numpy as np


class DataError(ValueError):
    """Malformed or inconsistent input data."""


TASKS = ("inhibition", "set_shifting")
CONDITIONS = {
    "inhibition": ("stimulus", "distracter"),
    "set_shifting": ("similar", "pair", "process"),
}
RESPONSES = ("correct", "incorrect", "none")

# (pre, post) in ms relative to stimulus onset
EPOCH_WINDOWS_MS = {
    "inhibition": (-100.0, 700.0),
    "set_shifting": (-100.0, 900.0),
}

FRONTAL_CLUSTER = ("F3", "F7", "Fz", "F4", "F8")
PARIETAL_CLUSTER = ("P3", "P7", "Pz", "P4", "P8")
CLUSTERS = {"frontal": FRONTAL_CLUSTER, "parietal": PARIETAL_CLUSTER}

# Idealised spherical 10-20 positions: (polar angle from vertex, azimuth) in
# degrees. x points to the right ear, y to the nose, z to the vertex; azimuth
# runs counterclockwise from +x seen from above.
_SPHERICAL_POSITIONS = {
    "Fp1": (72, 108), "Fp2": (72, 72),
    "F7": (72, 144), "F3": (51, 129), "Fz": (36, 90), "F4": (51, 51), "F8": (72, 36),
    "FC5": (60, 159), "FC1": (32, 135), "FCz": (18, 90), "FC2": (32, 45), "FC6": (60, 21),
    "T7": (72, 180), "C3": (36, 180), "Cz": (0, 0), "C4": (36, 0), "T8": (72, 0),
    "CP5": (60, 201), "CP1": (32, 225), "CPz": (18, 270), "CP2": (32, 315), "CP6": (60, 339),
    "P7": (72, 216), "P3": (51, 231), "Pz": (36, 270), "P4": (51, 309), "P8": (72, 324),
    "PO3": (62, 250), "PO4": (62, 290),
    "O1": (72, 252), "Oz": (72, 270), "O2": (72, 288),
    # off-scalp extras: mastoids and eye electrodes
    "M1": (110, 200), "M2": (110, 340),
    "HEOG": (105, 55), "VEOG": (112, 105),
    # extended labels that show up in some 32-channel caps
    "F5": (62, 137), "F6": (62, 43), "P5": (62, 223), "P6": (62, 317),
    "AFz": (54, 90), "POz": (54, 270), "C5": (54, 180), "C6": (54, 0),
}

DEFAULT_SCALP_LABELS = (
    "Fp1", "Fp2", "F7", "F3", "Fz", "F4", "F8",
    "FC5", "FC1", "FCz", "FC2", "FC6",
    "T7", "C3", "Cz", "C4", "T8",
    "CP5", "CP1", "CPz", "CP2", "CP6",
    "P7", "P3", "Pz", "P4", "P8",
    "PO3", "PO4", "O1", "Oz", "O2",
)
DEFAULT_EOG_LABELS = ("HEOG", "VEOG")
DEFAULT_REFERENCE = ("M1", "M2")


def standard_position(label: str) -> np.ndarray:
    """Unit-sphere position of a known 10-20 label."""
    try:
        theta, phi = _SPHERICAL_POSITIONS[label]
    except KeyError:
        raise DataError(f"no standard position for channel {label!r}") from None
    t, p = math.radians(theta), math.radians(phi)
    return np.array([math.sin(t) * math.cos(p), math.sin(t) * math.sin(p), math.cos(t)])


@dataclass(frozen=True)
class Montage:
    labels: tuple
    positions: np.ndarray  # (n_channels, 3), unit norm
    eog_channels: tuple = ()
    reference: tuple = DEFAULT_REFERENCE

    def __post_init__(self):
        labels = tuple(self.labels)
        pos = np.asarray(self.positions, dtype=float).reshape(len(labels), 3)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "positions", pos)
        object.__setattr__(self, "eog_channels", tuple(self.eog_channels))
        if len(set(labels)) != len(labels):
            raise DataError("channel labels must be unique")
        if not np.allclose(np.linalg.norm(pos, axis=1), 1.0, atol=1e-9, rtol=0):
            raise DataError("electrode positions must lie on the unit sphere")
        missing = set(self.eog_channels) - set(labels)
        if missing:
            raise DataError(f"EOG channels not in montage: {sorted(missing)}")

    @classmethod
    def from_labels(cls, labels: Sequence[str], eog: Sequence[str] = ()) -> "Montage":
        return cls(tuple(labels), np.array([standard_position(l) for l in labels]), tuple(eog))

    @classmethod
    def default(cls) -> "Montage":
        """32 scalp channels followed by HEOG and VEOG."""
        return cls.from_labels(DEFAULT_SCALP_LABELS + DEFAULT_EOG_LABELS, DEFAULT_EOG_LABELS)

    def __len__(self):
        return len(self.labels)

    def index(self, label: str) -> int:
        try:
            return self.labels.index(label)
        except ValueError:
            raise DataError(f"unknown channel {label!r}") from None

    @property
    def scalp_labels(self) -> tuple:
        return tuple(l for l in self.labels if l not in self.eog_channels)

    @property
    def scalp_mask(self) -> np.ndarray:
        return np.array([l not in self.eog_channels for l in self.labels])

    def subset(self, labels: Sequence[str]) -> "Montage":
        idx = [self.index(l) for l in labels]
        return Montage(
            tuple(labels),
            self.positions[idx],
            tuple(l for l in labels if l in self.eog_channels),
            self.reference,
        )

    def __eq__(self, other):
        if not isinstance(other, Montage):
            return NotImplemented
        return (
            self.labels == other.labels
            and self.eog_channels == other.eog_channels
            and self.reference == other.reference
            and np.array_equal(self.positions, other.positions)
        )

    __hash__ = None


@dataclass(frozen=True)
class Event:
    sample_index: int
    task: str
    condition: str
    response: str = "none"
    rt_ms: Optional[float] = None

    def __post_init__(self):
        if self.task not in TASKS:
            raise DataError(f"unknown task {self.task!r}")
        if self.condition not in CONDITIONS[self.task]:
            raise DataError(f"condition {self.condition!r} not valid for task {self.task!r}")
        if self.response not in RESPONSES:
            raise DataError(f"unknown response {self.response!r}")
        if self.rt_ms is not None and not (self.rt_ms >= 0 and math.isfinite(self.rt_ms)):
            raise DataError("rt_ms must be a finite non-negative number")


@dataclass(frozen=True, eq=False)
class Recording:
    data: np.ndarray  # (n_channels, n_samples), µV
    montage: Montage
    sample_rate: float = 1000.0
    events: tuple = ()

    def __post_init__(self):
        data = np.asarray(self.data, dtype=float)
        if data.ndim != 2:
            raise DataError("recording data must be 2-D (channels x samples)")
        object.__setattr__(self, "data", data)
        object.__setattr__(self, "events", tuple(self.events))
        if data.shape[0] != len(self.montage):
            raise DataError(
                f"channel-count mismatch: data has {data.shape[0]} rows, "
                f"montage has {len(self.montage)} channels"
            )
        if not self.sample_rate > 0:
            raise DataError("sample_rate must be positive")
        if not np.all(np.isfinite(data)):
            raise DataError("recording contains non-finite samples")
        n = data.shape[1]
        for ev in self.events:
            if not 0 <= ev.sample_index < n:
                raise DataError(f"event at sample {ev.sample_index} outside recording of {n} samples")

    @property
    def n_samples(self) -> int:
        return self.data.shape[1]

    @property
    def labels(self) -> tuple:
        return self.montage.labels

    def channel(self, label: str) -> np.ndarray:
        return self.data[self.montage.index(label)]

    def with_data(self, data: np.ndarray) -> "Recording":
        return replace(self, data=data)

    def __eq__(self, other):
        if not isinstance(other, Recording):
            return NotImplemented
        return (
            self.sample_rate == other.sample_rate
            and self.montage == other.montage
            and self.events == other.events
            and np.array_equal(self.data, other.data)
        )

    __hash__ = None


@dataclass(frozen=True, eq=False)
class Epoch:
    event: Event
    data: np.ndarray  # (n_channels, n_samples)
    sample_rate: float
    window_ms: tuple
    baseline_corrected: bool = False
    rejected: bool = False
    reject_reason: Optional[tuple] = None  # (channel label, sample index)

    def __post_init__(self):
        pre, post = self.window_ms
        if not pre < 0 < post:
            raise DataError("epoch window must straddle stimulus onset")
        expected = int(round((post - pre) * self.sample_rate / 1000.0))
        if self.data.shape[1] != expected:
            raise DataError(f"epoch has {self.data.shape[1]} samples, expected {expected}")

    @property
    def times_ms(self) -> np.ndarray:
        return epoch_times_ms(self.window_ms, self.sample_rate)


def epoch_times_ms(window_ms, sample_rate) -> np.ndarray:
    pre, post = window_ms
    n = int(round((post - pre) * sample_rate / 1000.0))
    return pre + np.arange(n) * 1000.0 / sample_rate


@dataclass(frozen=True, eq=False)
class ErpAverage:
    task: str
    condition: Optional[str]  # None: all conditions of the task
    n_epochs: int
    mean: np.ndarray
    variance: np.ndarray
    labels: tuple
    sample_rate: float
    window_ms: tuple

    def __post_init__(self):
        if self.n_epochs < 1:
            raise DataError("an average needs at least one epoch")
        if not np.all(np.isfinite(self.mean)):
            raise DataError("non-finite average")

    @property
    def times_ms(self) -> np.ndarray:
        return epoch_times_ms(self.window_ms, self.sample_rate)

    def waveform(self, label: str) -> np.ndarray:
        try:
            return self.mean[self.labels.index(label)]
        except ValueError:
            raise DataError(f"unknown channel {label!r}") from None

    @property
    def group(self) -> str:
        return f"{self.task}_{self.condition or 'all'}"


def select_channels(r: Recording, labels: Sequence[str]) -> Recording:
    idx = [r.montage.index(l) for l in labels]
    return Recording(r.data[idx], r.montage.subset(labels), r.sample_rate, r.events)


# -- file format ---------------------------------------------------------------


def _base(path) -> Path:
    p = Path(path)
    name = p.name
    for suffix in (".erph", ".erpd", ".events.csv"):
        if name.endswith(suffix):
            return p.with_name(name[: -len(suffix)])
    return p


def recording_paths(path) -> tuple:
    b = _base(path)
    return (
        b.with_name(b.name + ".erph"),
        b.with_name(b.name + ".erpd"),
        b.with_name(b.name + ".events.csv"),
    )


def _fmt_float(x: float) -> str:
    return repr(float(x))


def write_matrix(path, header: dict, matrix: np.ndarray) -> None:
    """Write ``key:value`` header plus a float32 channel-major matrix."""
    hpath, dpath, _ = recording_paths(path)
    hpath.parent.mkdir(parents=True, exist_ok=True)
    text = "".join(f"{k}:{v}\n" for k, v in header.items())
    hpath.write_bytes(text.encode("utf-8"))
    dpath.write_bytes(np.ascontiguousarray(matrix, dtype="<f4").tobytes())


def read_header(path) -> dict:
    hpath = recording_paths(path)[0]
    if not hpath.exists():
        raise DataError(f"missing header file {hpath}")
    header = {}
    for line in hpath.read_text(encoding="utf-8").splitlines():
        if not line.strip():
            continue
        key, sep, value = line.partition(":")
        if not sep:
            raise DataError(f"malformed header line {line!r}")
        header[key.strip()] = value.strip()
    return header


def read_matrix(path, n_rows: int) -> np.ndarray:
    dpath = recording_paths(path)[1]
    if not dpath.exists():
        raise DataError(f"missing data file {dpath}")
    raw = np.frombuffer(dpath.read_bytes(), dtype="<f4")
    if n_rows <= 0 or raw.size % n_rows:
        raise DataError(
            f"channel-count mismatch: {raw.size} samples do not split into {n_rows} channels"
        )
    data = raw.reshape(n_rows, -1).astype(float)
    if not np.all(np.isfinite(data)):
        raise DataError("data file contains non-finite samples")
    return data


def _split_list(value: str) -> tuple:
    return tuple(v for v in value.split(",") if v) if value else ()


def write_events(path, events: Iterable[Event]) -> None:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["sample_index", "task", "condition", "response", "rt_ms"])
    for ev in events:
        w.writerow([ev.sample_index, ev.task, ev.condition, ev.response,
                    "" if ev.rt_ms is None else _fmt_float(ev.rt_ms)])
    Path(path).write_bytes(buf.getvalue().encode("utf-8"))


def read_events(path) -> list:
    path = Path(path)
    if not path.exists():
        raise DataError(f"missing events file {path}")
    events = []
    with path.open(newline="", encoding="utf-8") as fh:
        for row in csv.DictReader(fh):
            rt = row["rt_ms"]
            events.append(Event(int(row["sample_index"]), row["task"], row["condition"],
                                row["response"], float(rt) if rt else None))
    return events


def write_recording(r: Recording, path) -> None:
    epath = recording_paths(path)[2]
    header = {
        "channels": len(r.montage),
        "rate_hz": _fmt_float(r.sample_rate),
        "labels": ",".join(r.montage.labels),
        "eog": ",".join(r.montage.eog_channels),
    }
    write_matrix(path, header, r.data)
    write_events(epath, r.events)


def read_recording(path) -> Recording:
    header = read_header(path)
    try:
        n = int(header["channels"])
        rate = float(header["rate_hz"])
        labels = _split_list(header["labels"])
    except (KeyError, ValueError) as exc:
        raise DataError(f"bad recording header: {exc}") from None
    if len(labels) != n:
        raise DataError(f"channel-count mismatch: header declares {n} channels, {len(labels)} labels")
    data = read_matrix(path, n)
    montage = Montage.from_labels(labels, _split_list(header.get("eog", "")))
    events = read_events(recording_paths(path)[2])
    return Recording(data, montage, rate, events)


def epochs_to_recording(epochs: Sequence[Epoch], montage: Montage) -> Recording:
    """Concatenate epochs into one recording with an event at each onset.

    Used to hand preprocessed trials between command-line stages.
    """
    if not epochs:
        raise DataError("no epochs to store")
    rate = epochs[0].sample_rate
    pre = int(round(-epochs[0].window_ms[0] * rate / 1000.0))
    events, offset = [], 0
    for ep in epochs:
        events.append(replace(ep.event, sample_index=offset + pre))
        offset += ep.data.shape[1]
    data = np.concatenate([ep.data for ep in epochs], axis=1)
    return Recording(data, montage, rate, events)


def recording_to_epochs(r: Recording) -> list:
    """Inverse of :func:`epochs_to_recording`; epochs come back baseline-corrected."""
    out = []
    for ev in r.events:
        win = EPOCH_WINDOWS_MS[ev.task]
        start = ev.sample_index + int(round(win[0] * r.sample_rate / 1000.0))
        n = int(round((win[1] - win[0]) * r.sample_rate / 1000.0))
        if start < 0 or start + n > r.n_samples:
            raise DataError(f"stored epoch at {ev.sample_index} is truncated")
        out.append(Epoch(ev, r.data[:, start:start + n], r.sample_rate, win, baseline_corrected=True))
    return out
