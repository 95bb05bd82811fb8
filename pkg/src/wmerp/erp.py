"""Averaging, smoothing, component peaks, cluster amplitudes and scalp grids."""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Sequence

import numpy as np

from .signal_core import CLUSTERS, DataError, Epoch, ErpAverage, Montage, standard_position

# kind -> (window lo, hi in ms, polarity)
COMPONENT_WINDOWS = {
    "N200": (150.0, 250.0, -1),
    "P200": (150.0, 250.0, +1),
    "P300": (250.0, 350.0, +1),
}


@dataclass(frozen=True)
class ErpComponent:
    kind: str
    channel: str
    latency_ms: float
    amplitude_uv: float
    window_ms: tuple


def average_epochs(epochs: Sequence[Epoch], task: str, condition: Optional[str] = None,
                   labels: Optional[Sequence[str]] = None) -> ErpAverage:
    """Mean and (population) variance over the kept epochs of one group.

    ``condition=None`` pools every condition of ``task``. Epochs are summed in
    the order given, so the result is reproducible bit for bit.
    """
    group = [
        e for e in epochs
        if not e.rejected and e.event.task == task and (condition is None or e.event.condition == condition)
    ]
    if not group:
        raise DataError(f"no accepted epochs for {task}/{condition or 'all'}")
    total = np.zeros_like(group[0].data)
    for e in group:
        total += e.data
    mean = total / len(group)
    sq = np.zeros_like(mean)
    for e in group:
        sq += (e.data - mean) ** 2
    first = group[0]
    if labels is None:
        labels = tuple(str(i) for i in range(mean.shape[0]))
    return ErpAverage(task, condition, len(group), mean, sq / len(group), tuple(labels),
                      first.sample_rate, first.window_ms)


def label_average(avg: ErpAverage, labels: Sequence[str]) -> ErpAverage:
    if len(labels) != avg.mean.shape[0]:
        raise DataError("label count does not match average rows")
    return ErpAverage(avg.task, avg.condition, avg.n_epochs, avg.mean, avg.variance,
                      tuple(labels), avg.sample_rate, avg.window_ms)


def smooth(w: np.ndarray, window_samples: int = 5) -> np.ndarray:
    """Centered moving average. Near the edges the window shrinks symmetrically."""
    w = np.asarray(w, dtype=float)
    n = len(w)
    if window_samples < 1 or window_samples % 2 == 0:
        raise ValueError("window_samples must be a positive odd integer")
    if window_samples > n:
        raise ValueError("smoothing window longer than the waveform")
    if window_samples == 1:
        return w.copy()
    half = window_samples // 2
    csum = np.concatenate(([0.0], np.cumsum(w)))
    idx = np.arange(n)
    h = np.minimum(np.minimum(idx, n - 1 - idx), half)
    return (csum[idx + h + 1] - csum[idx - h]) / (2 * h + 1)


def window_extremum(times_ms, waveform, lo_ms, hi_ms, polarity) -> tuple:
    """Latency and value of the most positive (polarity +1) or negative (-1)
    sample with ``lo_ms <= t <= hi_ms``. Earliest sample wins ties."""
    times_ms = np.asarray(times_ms)
    if lo_ms < times_ms[0] or hi_ms > times_ms[-1]:
        raise DataError(f"window {lo_ms}-{hi_ms} ms outside epoch span")
    sel = np.flatnonzero((times_ms >= lo_ms) & (times_ms <= hi_ms))
    seg = waveform[sel] * polarity
    k = sel[int(np.argmax(seg))]
    return float(times_ms[k]), float(waveform[k])


def detect_component(avg: ErpAverage, kind: str, channel: str, smooth_samples: int = 5) -> ErpComponent:
    lo, hi, polarity = COMPONENT_WINDOWS[kind]
    w = smooth(avg.waveform(channel), smooth_samples)
    lat, amp = window_extremum(avg.times_ms, w, lo, hi, polarity)
    return ErpComponent(kind, channel, lat, amp, (lo, hi))


def cluster_amplitude(avg: ErpAverage, cluster, kind: str) -> float:
    labels = CLUSTERS[cluster] if isinstance(cluster, str) else tuple(cluster)
    return float(np.mean([detect_component(avg, kind, ch).amplitude_uv for ch in labels]))


# -- topography ----------------------------------------------------------------


@dataclass(frozen=True, eq=False)
class TopoGrid:
    values: np.ndarray  # (n, n), NaN outside the head; row 0 is the front
    latency_ms: float
    extent: float = 1.0

    @property
    def resolution(self) -> int:
        return self.values.shape[0]

    @property
    def mask(self) -> np.ndarray:
        return np.isnan(self.values)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        for row in self.values:
            w.writerow(["" if np.isnan(v) else repr(float(v)) for v in row])
        return buf.getvalue()

    def to_pgm(self) -> bytes:
        """8-bit binary PGM, min-max scaled over the head; outside cells are 0."""
        v = self.values
        inside = ~np.isnan(v)
        img = np.zeros(v.shape, dtype=np.uint8)
        if inside.any():
            lo, hi = np.nanmin(v), np.nanmax(v)
            span = hi - lo
            scaled = np.zeros(v.shape) if span == 0 else (v - lo) / span
            img[inside] = np.round(1 + 254 * scaled[inside]).astype(np.uint8)
        n = v.shape[0]
        return f"P5\n{n} {n}\n255\n".encode("ascii") + img.tobytes()


def project_azimuthal(positions: np.ndarray) -> np.ndarray:
    """Azimuthal-equidistant projection from the vertex.

    The radius is the polar angle divided by 90 degrees, so the equator maps
    onto the unit circle. Returns (x, y) with y toward the nose.
    """
    p = np.asarray(positions, dtype=float)
    p = p / np.linalg.norm(p, axis=-1, keepdims=True)
    theta = np.arccos(np.clip(p[..., 2], -1.0, 1.0))
    horiz = np.hypot(p[..., 0], p[..., 1])
    rho = theta / (np.pi / 2)
    with np.errstate(invalid="ignore", divide="ignore"):
        ux = np.where(horiz > 0, p[..., 0] / horiz, 0.0)
        uy = np.where(horiz > 0, p[..., 1] / horiz, 0.0)
    return np.stack([rho * ux, rho * uy], axis=-1)


def grid_coords(resolution: int) -> np.ndarray:
    """Cell-center coordinates along each axis, spanning [-1, 1]."""
    return np.linspace(-1.0, 1.0, resolution)


def idw_interpolate(points, values, queries, power: float = 2.0, k: int = 4) -> np.ndarray:
    """Inverse-distance weighting over the ``k`` nearest points.

    A query that coincides with a point returns that point's value exactly.
    """
    points = np.asarray(points, dtype=float)
    values = np.asarray(values, dtype=float)
    queries = np.atleast_2d(np.asarray(queries, dtype=float))
    k = min(k, len(points))
    d = np.linalg.norm(queries[:, None, :] - points[None, :, :], axis=-1)
    near = np.argsort(d, axis=1, kind="stable")[:, :k]
    dn = np.take_along_axis(d, near, axis=1)
    vn = values[near]
    out = np.empty(len(queries))
    exact = dn[:, 0] == 0
    out[exact] = vn[exact, 0]
    w = 1.0 / dn[~exact] ** power
    out[~exact] = np.sum(w * vn[~exact], axis=1) / np.sum(w, axis=1)
    return out


def topo_values(positions, values, latency_ms: float = 0.0, resolution: int = 67,
                power: float = 2.0, k: int = 4) -> TopoGrid:
    xy = project_azimuthal(positions)
    c = grid_coords(resolution)
    gx, gy = np.meshgrid(c, c[::-1])  # row 0 = front (y = +1)
    inside = np.hypot(gx, gy) <= 1.0
    grid = np.full((resolution, resolution), np.nan)
    q = np.stack([gx[inside], gy[inside]], axis=1)
    grid[inside] = idw_interpolate(xy, values, q, power, k)
    return TopoGrid(grid, latency_ms)


def topo_snapshot(avg: ErpAverage, latency_ms: float, resolution: int = 67,
                  montage: Optional[Montage] = None) -> TopoGrid:
    """Scalp grid at one latency. EOG channels are left out when a montage is given."""
    times = avg.times_ms
    if not times[0] <= latency_ms <= times[-1]:
        raise DataError(f"latency {latency_ms} ms outside epoch span")
    k = int(np.argmin(np.abs(times - latency_ms)))
    labels = list(avg.labels)
    if montage is not None:
        labels = [l for l in labels if l not in montage.eog_channels]
        positions = np.array([montage.positions[montage.index(l)] for l in labels])
    else:
        positions = np.array([standard_position(l) for l in labels])
    values = np.array([avg.waveform(l)[k] for l in labels])
    return topo_values(positions, values, latency_ms, resolution)


def electrode_cell(position, resolution: int) -> tuple:
    """(row, col) of the grid cell nearest to an electrode's projection."""
    x, y = project_azimuthal(np.asarray(position)[None])[0]
    c = grid_coords(resolution)
    col = int(np.argmin(np.abs(c - x)))
    row = int(np.argmin(np.abs(c[::-1] - y)))
    return row, col


# -- CSV surfaces ----------------------------------------------------------------


def average_to_csv(avg: ErpAverage) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["time_ms", *avg.labels])
    for t, col in zip(avg.times_ms, avg.mean.T):
        w.writerow([repr(float(t)), *(repr(float(v)) for v in col)])
    return buf.getvalue()


def read_average_csv(path, task: str = "unknown", condition: Optional[str] = None) -> ErpAverage:
    with Path(path).open(newline="", encoding="utf-8") as fh:
        rows = list(csv.reader(fh))
    if len(rows) < 3 or rows[0][0] != "time_ms":
        raise DataError(f"{path} is not an ERP average CSV")
    labels = tuple(rows[0][1:])
    arr = np.array([[float(v) for v in r] for r in rows[1:]])
    times = arr[:, 0]
    rate = 1000.0 / (times[1] - times[0])
    window = (float(times[0]), float(times[0] + len(times) * 1000.0 / rate))
    mean = arr[:, 1:].T
    return ErpAverage(task, condition, 1, mean, np.zeros_like(mean), labels, rate, window)


COMPONENT_FIELDS = ["task", "condition", "kind", "channel", "latency_ms", "amplitude_uv"]


def components_to_csv(rows) -> str:
    """``rows`` are ``(task, condition, ErpComponent)`` triples."""
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(COMPONENT_FIELDS)
    for task, condition, c in rows:
        w.writerow([task, condition, c.kind, c.channel, repr(c.latency_ms), repr(c.amplitude_uv)])
    return buf.getvalue()


def read_components_csv(path) -> list:
    out = []
    with Path(path).open(newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        if reader.fieldnames != COMPONENT_FIELDS:
            raise DataError(f"{path}: expected columns {','.join(COMPONENT_FIELDS)}")
        for r in reader:
            lo, hi, _ = COMPONENT_WINDOWS.get(r["kind"], (float("nan"), float("nan"), 0))
            out.append((r["task"], r["condition"],
                        ErpComponent(r["kind"], r["channel"], float(r["latency_ms"]),
                                     float(r["amplitude_uv"]), (lo, hi))))
    return out
