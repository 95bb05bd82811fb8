"""Trial schedules, simulated behaviour and dipole-driven synthetic EEG."""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Optional, Sequence

import numpy as np

from .signal_core import CONDITIONS, EPOCH_WINDOWS_MS, DataError, Event, Montage, Recording
from .signal_core import standard_position
from .source import Dipole, HeadModel, dipole_topography, sphere_potential

# RT model placeholders: the study measured RT but reports no values
DEFAULT_RT_MEDIAN_MS = 450.0
DEFAULT_RT_SIGMA = 0.3

DEFAULT_CONDITION_PROBABILITIES = {
    "inhibition": {"stimulus": 0.5, "distracter": 0.5},
    "set_shifting": {"similar": 1 / 3, "pair": 1 / 3, "process": 1 / 3},
}
BUNDLED_ACCURACY = {"inhibition": 0.875, "set_shifting": 0.595}


@dataclass(frozen=True)
class ParadigmSpec:
    task: str
    n_trials: int = 200
    isi_ms: tuple = (1200.0, 1600.0)
    condition_probabilities: Optional[dict] = None
    accuracy_p: float = 0.875
    rt_median_ms: float = DEFAULT_RT_MEDIAN_MS
    rt_sigma: float = DEFAULT_RT_SIGMA
    seed: int = 0
    sample_rate: float = 1000.0
    lead_in_ms: float = 1000.0

    def __post_init__(self):
        if self.condition_probabilities is None:
            object.__setattr__(self, "condition_probabilities",
                               dict(DEFAULT_CONDITION_PROBABILITIES[self.task]))
        probs = self.condition_probabilities
        if set(probs) - set(CONDITIONS[self.task]):
            raise ValueError(f"conditions {sorted(set(probs) - set(CONDITIONS[self.task]))} "
                             f"do not belong to task {self.task!r}")
        if any(p < 0 for p in probs.values()) or not math.isclose(sum(probs.values()), 1.0, abs_tol=1e-9):
            raise ValueError("condition probabilities must be non-negative and sum to 1")
        if not 0.0 <= self.accuracy_p <= 1.0:
            raise ValueError("accuracy_p must be in [0, 1]")
        if self.n_trials < 0:
            raise ValueError("n_trials must be >= 0")
        lo, hi = self.isi_ms
        pre, post = EPOCH_WINDOWS_MS[self.task]
        if lo > hi:
            raise ValueError("isi range is reversed")
        if lo < post - pre:
            raise ValueError(f"minimum ISI {lo} ms is shorter than the {post - pre} ms epoch span")


@dataclass(frozen=True)
class SourceComponent:
    kind: str  # N200 / P200 / P300
    dipole: Dipole
    peak_latency_ms: float
    width_ms: float  # Gaussian standard deviation
    gain: float = 1.0
    condition_gains: dict = field(default_factory=dict)  # condition -> multiplier

    @property
    def sign(self) -> float:
        return -1.0 if self.kind.startswith("N") else 1.0


@dataclass(frozen=True)
class SourceScenario:
    components: tuple
    noise_sigma_uv: float = 5.0
    blink_rate_per_min: float = 0.0
    blink_amplitude_uv: float = 300.0
    pink_noise: bool = False

    def scaled(self, factor: float) -> "SourceScenario":
        return replace(self, components=tuple(replace(c, gain=c.gain * factor) for c in self.components))


def generate_events(spec: ParadigmSpec) -> list:
    """Deterministic trial list; onsets spaced uniformly within the ISI range."""
    if spec.n_trials == 0:
        return []
    rng = np.random.default_rng(spec.seed)
    conds = list(spec.condition_probabilities)
    p = np.array([spec.condition_probabilities[c] for c in conds])
    drawn = rng.choice(len(conds), size=spec.n_trials, p=p / p.sum())
    correct = rng.random(spec.n_trials) < spec.accuracy_p
    rts = spec.rt_median_ms * np.exp(spec.rt_sigma * rng.standard_normal(spec.n_trials))
    gaps = rng.uniform(spec.isi_ms[0], spec.isi_ms[1], size=spec.n_trials - 1)
    onsets_ms = spec.lead_in_ms + np.concatenate(([0.0], np.cumsum(gaps)))
    onsets = np.round(onsets_ms * spec.sample_rate / 1000.0).astype(int)
    return [
        Event(int(onsets[i]), spec.task, conds[drawn[i]],
              "correct" if correct[i] else "incorrect", float(rts[i]))
        for i in range(spec.n_trials)
    ]


def _pink(rng, shape) -> np.ndarray:
    n = shape[-1]
    spec = np.fft.rfft(rng.standard_normal(shape), axis=-1)
    f = np.arange(spec.shape[-1], dtype=float)
    f[0] = 1.0
    spec /= np.sqrt(f)
    x = np.fft.irfft(spec, n=n, axis=-1)
    return x / x.std(axis=-1, keepdims=True)


def blink_weights(montage: Montage) -> np.ndarray:
    """Per-channel blink mixing: full on VEOG, decaying with distance from the eyes."""
    eyes = np.array([0.0, 0.93, -0.37])  # between the eyes, below the equator
    eyes /= np.linalg.norm(eyes)
    d = np.linalg.norm(montage.positions - eyes, axis=1)
    w = np.exp(-(d / 0.9) ** 2)
    w /= w.max()
    for label in montage.eog_channels:
        if label != "VEOG":
            w[montage.index(label)] *= 0.2  # horizontal derivation barely sees blinks
    return w


def blink_onsets(n_samples: int, rate_per_min: float, sample_rate: float, seed: int) -> np.ndarray:
    """Blink peak samples for a recording; same seed, same blinks."""
    if rate_per_min <= 0:
        return np.zeros(0, dtype=int)
    rng = np.random.default_rng([seed, 1])
    minutes = n_samples / sample_rate / 60.0
    k = rng.poisson(rate_per_min * minutes)
    return np.sort(rng.integers(0, n_samples, size=k))


BLINK_WIDTH_MS = 60.0


def referenced_topography(montage: Montage, head: HeadModel, dipole: Dipole) -> np.ndarray:
    """Dipole potential at every channel relative to the montage reference
    electrodes (linked mastoids by default), as an amplifier would record it."""
    raw = dipole_topography(montage, head, dipole)
    if not montage.reference:
        return raw
    ref_pos = np.array([standard_position(l) for l in montage.reference]) * head.sphere_radius_m
    ref = sphere_potential(ref_pos, np.asarray(dipole.position), head.conductivity_s_per_m)
    return raw - float(np.mean(ref @ np.asarray(dipole.moment)))


def synthesize_recording(
    events: Sequence[Event],
    scenario: SourceScenario,
    montage: Optional[Montage] = None,
    head: HeadModel = HeadModel(),
    n_samples: Optional[int] = None,
    sample_rate: float = 1000.0,
    seed: int = 0,
) -> Recording:
    """Sum of forward-modelled Gaussian components per event, plus noise and blinks.

    Component potentials are taken relative to ``montage.reference``.

    ``n_samples`` defaults to one second past the last event's epoch.
    """
    montage = montage or Montage.default()
    events = list(events)
    if n_samples is None:
        last = max((e.sample_index for e in events), default=0)
        n_samples = last + int(round(2.0 * sample_rate))
    if any(not 0 <= e.sample_index < n_samples for e in events):
        raise DataError("event outside the requested duration")
    data = np.zeros((len(montage), n_samples))
    for comp in scenario.components:
        topo = referenced_topography(montage, head, comp.dipole)
        half = int(math.ceil(5 * comp.width_ms * sample_rate / 1000.0))
        for ev in events:
            g = comp.gain * comp.condition_gains.get(ev.condition, 1.0) * comp.sign
            if g == 0:
                continue
            centre = ev.sample_index + comp.peak_latency_ms * sample_rate / 1000.0
            lo = max(0, int(math.floor(centre)) - half)
            hi = min(n_samples, int(math.ceil(centre)) + half + 1)
            t_ms = (np.arange(lo, hi) - centre) * 1000.0 / sample_rate
            data[:, lo:hi] += np.outer(topo * g, np.exp(-0.5 * (t_ms / comp.width_ms) ** 2))
    if scenario.noise_sigma_uv > 0:
        rng = np.random.default_rng([seed, 0])
        if scenario.pink_noise:
            noise = _pink(rng, data.shape)
        else:
            noise = rng.standard_normal(data.shape)
        data += scenario.noise_sigma_uv * noise
    onsets = blink_onsets(n_samples, scenario.blink_rate_per_min, sample_rate, seed)
    if len(onsets):
        w = blink_weights(montage) * scenario.blink_amplitude_uv
        half = int(math.ceil(5 * BLINK_WIDTH_MS * sample_rate / 1000.0))
        for b in onsets:
            lo, hi = max(0, b - half), min(n_samples, b + half + 1)
            t_ms = (np.arange(lo, hi) - b) * 1000.0 / sample_rate
            data[:, lo:hi] += np.outer(w, np.exp(-0.5 * (t_ms / BLINK_WIDTH_MS) ** 2))
    return Recording(data, montage, sample_rate, events)


def midline_dipole(direction_label_theta_deg: float, anterior: bool, depth_fraction: float,
                   strength: float, head: HeadModel = HeadModel()) -> Dipole:
    """Radially oriented dipole under a midline scalp point.

    ``direction_label_theta_deg`` is the polar angle of the scalp point (36
    for Fz/Pz); the source sits at ``depth_fraction`` of the head radius.
    """
    t = math.radians(direction_label_theta_deg)
    y = math.sin(t) * (1 if anterior else -1)
    u = np.array([0.0, y, math.cos(t)])
    pos = u * depth_fraction * head.sphere_radius_m
    return Dipole(tuple(pos), tuple(u * strength))


@dataclass(frozen=True)
class TaskScenario:
    paradigm: ParadigmSpec
    sources: SourceScenario


def bundled_scenarios(n_trials: int = 200, seed: int = 0) -> tuple:
    """Inhibition and set-shifting scenarios sharing one dipole geometry.

    A frontal source carries the N200, a parietal source the P200, and both
    carry the P300. Set-shifting gains are 1.5x the inhibition gains.
    """
    frontal = midline_dipole(36, True, 0.45, 0.08)
    parietal = midline_dipole(36, False, 0.45, 0.08)
    inhibition_sources = SourceScenario(
        components=(
            SourceComponent("N200", frontal, 200.0, 20.0, 0.6, {"distracter": 1.3}),
            SourceComponent("P200", parietal, 180.0, 15.0, 0.4),
            SourceComponent("P300", frontal, 300.0, 35.0, 0.5, {"distracter": 0.7}),
            SourceComponent("P300", parietal, 300.0, 35.0, 1.0, {"distracter": 0.7}),
        ),
        noise_sigma_uv=5.0,
        blink_rate_per_min=6.0,
    )
    shifting_sources = replace(
        inhibition_sources.scaled(1.5),
        components=tuple(
            replace(c, condition_gains={"pair": 0.85, "process": 0.7} if c.kind == "P300" else {})
            for c in inhibition_sources.scaled(1.5).components
        ),
    )
    return (
        TaskScenario(ParadigmSpec("inhibition", n_trials, accuracy_p=BUNDLED_ACCURACY["inhibition"],
                                  seed=seed), inhibition_sources),
        TaskScenario(ParadigmSpec("set_shifting", n_trials,
                                  accuracy_p=BUNDLED_ACCURACY["set_shifting"], seed=seed + 1),
                     shifting_sources),
    )
