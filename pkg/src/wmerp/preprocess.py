"""Continuous-data cleaning and trial extraction.

Order used by the pipeline: filter -> ocular SVD removal -> epoch ->
baseline -> amplitude rejection.
"""

from __future__ import annotations

import csv
import io
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Optional, Sequence

import numpy as np
from scipy import signal

from .signal_core import EPOCH_WINDOWS_MS, DataError, Epoch, Recording


@dataclass(frozen=True)
class FilterSpec:
    """Butterworth filter applied to every channel.

    ``kind="highpass"`` is the working default. ``kind="lowpass"`` keeps the
    literal 1 Hz low-pass reading available for comparison runs; it flattens
    everything in the 150-350 ms component range.
    """

    kind: str = "highpass"
    cutoff_hz: float = 1.0
    order: int = 4
    zero_phase: bool = True

    def __post_init__(self):
        if self.kind not in ("highpass", "lowpass"):
            raise ValueError(f"unsupported filter kind {self.kind!r}")
        if self.order < 1:
            raise ValueError("filter order must be >= 1")
        if not self.cutoff_hz > 0:
            raise ValueError("cutoff must be positive")

    @classmethod
    def literal_lowpass(cls) -> "FilterSpec":
        return cls(kind="lowpass")


@dataclass
class RejectionReport:
    n_total: int
    rejected: list = field(default_factory=list)  # per epoch: bool
    reasons: list = field(default_factory=list)  # per epoch: (channel, sample) or None

    @property
    def n_rejected(self) -> int:
        return int(sum(self.rejected))

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["epoch_index", "rejected", "reason_channel", "reason_sample"])
        for i, (rej, why) in enumerate(zip(self.rejected, self.reasons)):
            ch, s = why if why else ("", "")
            w.writerow([i, int(rej), ch, s])
        return buf.getvalue()

    def write(self, path) -> None:
        Path(path).write_bytes(self.to_csv().encode("utf-8"))


def apply_filter(r: Recording, spec: FilterSpec = FilterSpec()) -> Recording:
    nyq = r.sample_rate / 2.0
    if spec.cutoff_hz >= nyq:
        raise DataError(f"cutoff {spec.cutoff_hz} Hz is not below Nyquist ({nyq} Hz)")
    if r.n_samples < 3 * spec.order:
        raise DataError(f"recording too short to filter ({r.n_samples} samples)")
    sos = signal.butter(spec.order, spec.cutoff_hz, btype=spec.kind, fs=r.sample_rate, output="sos")
    if spec.zero_phase:
        padlen = min(3 * (2 * len(sos) + 1), r.n_samples - 1)
        out = signal.sosfiltfilt(sos, r.data, axis=1, padlen=padlen)
    else:
        out = signal.sosfilt(sos, r.data, axis=1)
    return r.with_data(out)


def _abs_corr(rows: np.ndarray, ref: np.ndarray) -> np.ndarray:
    """|Pearson r| between every row of ``rows`` and the vector ``ref``; 0 if undefined."""
    a = rows - rows.mean(axis=1, keepdims=True)
    b = ref - ref.mean()
    den = np.linalg.norm(a, axis=1) * np.linalg.norm(b)
    with np.errstate(invalid="ignore", divide="ignore"):
        c = np.abs(a @ b) / den
    return np.where(den > 0, c, 0.0)


def remove_ocular_svd(r: Recording, corr_threshold: float = 0.8) -> tuple:
    """Zero SVD components of the scalp data that track an EOG channel.

    Returns ``(cleaned recording, number of removed components)``. EOG rows
    pass through unchanged.
    """
    if not 0 < corr_threshold <= 1:
        raise ValueError("corr_threshold must be in (0, 1]")
    eog = r.montage.eog_channels
    if not eog:
        raise DataError("montage declares no EOG channels")
    scalp = r.montage.scalp_mask
    x = r.data[scalp]
    u, s, vt = np.linalg.svd(x, full_matrices=False)
    courses = s[:, None] * vt
    drop = np.zeros(len(s), dtype=bool)
    for label in eog:
        ref = r.channel(label)
        if np.ptp(ref) == 0:
            continue
        drop |= _abs_corr(courses, ref) >= corr_threshold
    if not drop.any():
        return r, 0
    keep = ~drop
    cleaned = r.data.copy()
    cleaned[scalp] = (u[:, keep] * s[keep]) @ vt[keep]
    return r.with_data(cleaned), int(drop.sum())


def extract_epochs(r: Recording, task: str, windows=EPOCH_WINDOWS_MS) -> tuple:
    """Cut one epoch per event of ``task``.

    Returns ``(epochs, skipped)`` where ``skipped`` lists the events whose
    window falls outside the recording.
    """
    pre, post = windows[task]
    start_off = int(round(pre * r.sample_rate / 1000.0))
    n = int(round((post - pre) * r.sample_rate / 1000.0))
    epochs, skipped = [], []
    for ev in r.events:
        if ev.task != task:
            continue
        start = ev.sample_index + start_off
        if start < 0 or start + n > r.n_samples:
            skipped.append(ev)
            continue
        epochs.append(Epoch(ev, r.data[:, start:start + n].copy(), r.sample_rate, (pre, post)))
    return epochs, skipped


def baseline_correct(e: Epoch) -> Epoch:
    n_pre = int(np.sum(e.times_ms < 0))
    if n_pre == 0:
        raise DataError("epoch has no pre-stimulus samples")
    base = e.data[:, :n_pre].mean(axis=1, keepdims=True)
    return replace(e, data=e.data - base, baseline_corrected=True)


def reject_artifacts(
    epochs: Sequence[Epoch], threshold_uv: float = 75.0, labels: Optional[Sequence[str]] = None,
    eog_channels: Sequence[str] = (),
) -> tuple:
    """Flag epochs where any scalp sample exceeds ``threshold_uv`` in magnitude.

    ``labels`` names the epoch rows; rows listed in ``eog_channels`` are not
    checked. Returns ``(flagged epochs, RejectionReport)``.
    """
    if not threshold_uv >= 0:
        raise ValueError("rejection threshold must be non-negative")
    out, report = [], RejectionReport(len(epochs))
    for ep in epochs:
        n_ch = ep.data.shape[0]
        names = list(labels) if labels is not None else [str(i) for i in range(n_ch)]
        check = np.array([nm not in eog_channels for nm in names])
        over = (np.abs(ep.data) > threshold_uv) & check[:, None]
        if over.any():
            # first offending sample in time, lowest channel on ties
            s = int(np.argmax(over.any(axis=0)))
            c = int(np.argmax(over[:, s]))
            reason = (names[c], s)
            out.append(replace(ep, rejected=True, reject_reason=reason))
            report.rejected.append(True)
            report.reasons.append(reason)
        else:
            out.append(replace(ep, rejected=False, reject_reason=None))
            report.rejected.append(False)
            report.reasons.append(None)
    return out, report


def preprocess_recording(
    r: Recording,
    task: str,
    spec: FilterSpec = FilterSpec(),
    corr_threshold: float = 0.8,
    threshold_uv: float = 75.0,
    windows=EPOCH_WINDOWS_MS,
) -> tuple:
    """Run the full chain; returns ``(epochs, report, n_ocular_removed, skipped)``."""
    filtered = apply_filter(r, spec)
    n_removed = 0
    if r.montage.eog_channels:
        filtered, n_removed = remove_ocular_svd(filtered, corr_threshold)
    epochs, skipped = extract_epochs(filtered, task, windows)
    epochs = [baseline_correct(e) for e in epochs]
    epochs, report = reject_artifacts(epochs, threshold_uv, r.montage.labels, r.montage.eog_channels)
    return epochs, report, n_removed, skipped
