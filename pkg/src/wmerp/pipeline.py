"""Config-driven end-to-end run: synth -> preprocess -> erp -> stats -> topo -> localize.

Every file written under the output directory is listed in ``manifest.csv``
as ``path,bytes,sha256``.
"""

from __future__ import annotations

import configparser
import csv
import hashlib
import io
import logging
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Optional

import numpy as np

from . import erp, preprocess, source, stats, synth
from .signal_core import (CLUSTERS, CONDITIONS, EPOCH_WINDOWS_MS, TASKS, Montage,
                          read_recording, write_recording)
from .stats import NumericalError

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class StageError(RuntimeError):
    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause


EXIT_OK, EXIT_CONFIG, EXIT_DATA, EXIT_NUMERIC = 0, 2, 3, 4


def exit_code_for(exc: BaseException) -> int:
    if isinstance(exc, StageError):
        exc = exc.cause
    if isinstance(exc, ConfigError):
        return EXIT_CONFIG
    if isinstance(exc, (NumericalError, np.linalg.LinAlgError, FloatingPointError)):
        return EXIT_NUMERIC
    return EXIT_DATA


@dataclass
class SynthSettings:
    trials: int = 200
    noise_sigma_uv: float = 5.0
    blink_rate_per_min: float = 6.0
    pink_noise: bool = False


@dataclass
class PipelineConfig:
    output_dir: Path
    seed: int = 0
    tasks: tuple = TASKS
    synth: Optional[SynthSettings] = None
    inputs: dict = field(default_factory=dict)  # task -> recording base path
    filter: preprocess.FilterSpec = field(default_factory=preprocess.FilterSpec)
    epoch_windows: dict = field(default_factory=lambda: dict(EPOCH_WINDOWS_MS))
    reject_threshold_uv: float = 75.0
    ocular_corr_threshold: float = 0.8
    clusters: dict = field(default_factory=lambda: dict(CLUSTERS))
    topo_latencies_ms: tuple = (100.0, 200.0, 300.0)
    topo_resolution: int = 67
    source_spacing_m: float = 0.01
    source_alpha: float = 0.0
    source_component: str = "P300"
    source_channel: str = "Pz"

    def __post_init__(self):
        if self.synth is None and not self.inputs:
            raise ConfigError("config needs either a [synth] section or [input] paths")
        for task in self.tasks:
            if task not in TASKS:
                raise ConfigError(f"unknown task {task!r}")
            if self.synth is None:
                if task not in self.inputs:
                    raise ConfigError(f"no input recording for task {task!r}")
                if not Path(str(self.inputs[task]) + ".erph").exists():
                    raise ConfigError(f"input recording {self.inputs[task]} not found")


def _floats(text: str) -> tuple:
    return tuple(float(v) for v in text.replace(" ", "").split(",") if v)


def _labels(text: str) -> tuple:
    return tuple(v.strip() for v in text.split(",") if v.strip())


def parse_config(text: str, base_dir: Path = Path("."), seed: Optional[int] = None) -> PipelineConfig:
    cp = configparser.ConfigParser(inline_comment_prefixes=(";", "#"))
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise ConfigError(f"config parse error: {exc}") from None
    try:
        p = cp["pipeline"] if cp.has_section("pipeline") else {}
        out = p.get("output_dir")
        if not out:
            raise ConfigError("[pipeline] output_dir is required")
        kw = {
            "output_dir": (base_dir / out) if not Path(out).is_absolute() else Path(out),
            "seed": int(p.get("seed", 0)) if seed is None else int(seed),
        }
        if "tasks" in p:
            kw["tasks"] = _labels(p["tasks"])
        if cp.has_section("synth"):
            s = cp["synth"]
            kw["synth"] = SynthSettings(
                trials=s.getint("trials", 200),
                noise_sigma_uv=s.getfloat("noise_sigma_uv", 5.0),
                blink_rate_per_min=s.getfloat("blink_rate_per_min", 6.0),
                pink_noise=s.getboolean("pink_noise", False),
            )
        if cp.has_section("input"):
            kw["inputs"] = {k: base_dir / v for k, v in cp["input"].items()}
        if cp.has_section("filter"):
            f = cp["filter"]
            kw["filter"] = preprocess.FilterSpec(
                kind=f.get("kind", "highpass"), cutoff_hz=f.getfloat("cutoff_hz", 1.0),
                order=f.getint("order", 4), zero_phase=f.getboolean("zero_phase", True))
        if cp.has_section("epochs"):
            windows = dict(EPOCH_WINDOWS_MS)
            for task, val in cp["epochs"].items():
                pre, post = _floats(val)
                windows[task] = (pre, post)
            kw["epoch_windows"] = windows
        if cp.has_section("reject"):
            r = cp["reject"]
            kw["reject_threshold_uv"] = r.getfloat("threshold_uv", 75.0)
            kw["ocular_corr_threshold"] = r.getfloat("ocular_corr_threshold", 0.8)
        if cp.has_section("clusters"):
            kw["clusters"] = {k: _labels(v) for k, v in cp["clusters"].items()}
        if cp.has_section("topo"):
            t = cp["topo"]
            kw["topo_latencies_ms"] = _floats(t.get("latencies_ms", "100,200,300"))
            kw["topo_resolution"] = t.getint("resolution", 67)
        if cp.has_section("source"):
            s = cp["source"]
            kw["source_spacing_m"] = s.getfloat("spacing_m", 0.01)
            kw["source_alpha"] = s.getfloat("alpha", 0.0)
            kw["source_component"] = s.get("component", "P300")
            kw["source_channel"] = s.get("channel", "Pz")
        return PipelineConfig(**kw)
    except ConfigError:
        raise
    except (ValueError, KeyError) as exc:
        raise ConfigError(f"bad config value: {exc}") from None


def load_config(path, seed: Optional[int] = None) -> PipelineConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file {path} not found")
    return parse_config(path.read_text(encoding="utf-8"), path.parent, seed)


def demo_config_text() -> str:
    return resources.files("wmerp").joinpath("data/demo.ini").read_text(encoding="utf-8")


def file_digest(path: Path) -> str:
    return hashlib.sha256(path.read_bytes()).hexdigest()


class _Writer:
    """Tracks every file written below the output directory."""

    def __init__(self, root: Path):
        self.root = root
        self.written = []

    def path(self, rel: str) -> Path:
        p = self.root / rel
        p.parent.mkdir(parents=True, exist_ok=True)
        return p

    def text(self, rel: str, content: str) -> None:
        self.path(rel).write_bytes(content.encode("utf-8"))
        self.written.append(rel)

    def binary(self, rel: str, content: bytes) -> None:
        self.path(rel).write_bytes(content)
        self.written.append(rel)

    def recording(self, rel_base: str, rec) -> None:
        write_recording(rec, self.path(rel_base))
        self.written.extend(rel_base + sfx for sfx in (".erph", ".erpd", ".events.csv"))

    def manifest(self) -> list:
        rows = []
        for rel in sorted(set(self.written)):
            p = self.root / rel
            rows.append((rel, p.stat().st_size, file_digest(p)))
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(["path", "bytes", "sha256"])
        w.writerows(rows)
        (self.root / "manifest.csv").write_bytes(buf.getvalue().encode("utf-8"))
        return rows


def _stage(name):
    def wrap(fn):
        def inner(*args, **kwargs):
            log.info("stage %s", name)
            try:
                return fn(*args, **kwargs)
            except StageError:
                raise
            except Exception as exc:  # noqa: BLE001 - relabel with the stage name
                raise StageError(name, exc) from exc
        return inner
    return wrap


def component_kinds(task: str) -> tuple:
    kinds = set(stats.TASK_KINDS[task]) | set(stats.LATENCY_RATIOS[task])
    return tuple(k for k in erp.COMPONENT_WINDOWS if k in kinds)


@_stage("synth")
def _synth(cfg: PipelineConfig, out: _Writer) -> dict:
    recs = {}
    scen = dict(zip(TASKS, synth.bundled_scenarios(cfg.synth.trials, cfg.seed)))
    for i, task in enumerate(cfg.tasks):
        ts = scen[task]
        sources = synth.SourceScenario(ts.sources.components, cfg.synth.noise_sigma_uv,
                                       cfg.synth.blink_rate_per_min,
                                       ts.sources.blink_amplitude_uv, cfg.synth.pink_noise)
        events = synth.generate_events(ts.paradigm)
        rec = synth.synthesize_recording(events, sources, seed=cfg.seed * 1000 + 17 + i)
        out.recording(f"synth/{task}", rec)
        recs[task] = rec
    return recs


@_stage("preprocess")
def _preprocess(cfg, recs, out: _Writer) -> dict:
    result = {}
    for task, rec in recs.items():
        epochs, report, n_removed, skipped = preprocess.preprocess_recording(
            rec, task, cfg.filter, cfg.ocular_corr_threshold, cfg.reject_threshold_uv,
            cfg.epoch_windows)
        log.info("%s: %d epochs, %d rejected, %d ocular components removed, %d skipped",
                 task, report.n_total, report.n_rejected, n_removed, len(skipped))
        out.text(f"preprocess/{task}_rejection.csv", report.to_csv())
        result[task] = epochs
    return result


@_stage("erp")
def _erp(cfg, recs, epochs_by_task, out: _Writer) -> tuple:
    averages, rows = {}, []
    channels = []
    for members in cfg.clusters.values():
        channels.extend(c for c in members if c not in channels)
    for task, epochs in epochs_by_task.items():
        labels = recs[task].montage.labels
        present = sorted({e.event.condition for e in epochs if not e.rejected},
                         key=CONDITIONS[task].index)
        for cond in (*present, None):
            avg = erp.average_epochs(epochs, task, cond, labels)
            averages[(task, cond)] = avg
            out.text(f"erp/{avg.group}_average.csv", erp.average_to_csv(avg))
            if cond is None:
                continue
            for kind in component_kinds(task):
                for ch in channels:
                    rows.append((task, cond, erp.detect_component(avg, kind, ch)))
    out.text("erp/components.csv", erp.components_to_csv(rows))
    return averages, rows


@_stage("stats")
def _stats(cfg, recs, rows, out: _Writer) -> None:
    report = stats.compare_conditions(rows, cfg.clusters)
    out.text("stats/stats_report.csv", stats.report_to_csv(report))
    summaries = [stats.behavior_summary(list(recs[t].events), t) for t in recs]
    out.text("stats/behavior.csv", stats.behavior_to_csv(summaries))


@_stage("topo")
def _topo(cfg, recs, averages, out: _Writer) -> None:
    for task in recs:
        avg = averages[(task, None)]
        for lat in cfg.topo_latencies_ms:
            grid = erp.topo_snapshot(avg, lat, cfg.topo_resolution, recs[task].montage)
            stem = f"topo/{task}_{lat:g}ms"
            out.text(stem + ".csv", grid.to_csv())
            out.binary(stem + ".pgm", grid.to_pgm())


def localize_average(avg, montage: Montage, latency_ms: float, alpha: float,
                     spacing_m: float = 0.01, lf: Optional[source.LeadField] = None) -> tuple:
    """sLORETA and minimum-norm maps of the scalp field at one latency."""
    head = source.HeadModel()
    if lf is None:
        lf = source.build_lead_field(montage, head, source.VoxelGrid.build(head, spacing_m))
    k = int(np.argmin(np.abs(avg.times_ms - latency_ms)))
    x = np.array([avg.waveform(l)[k] for l in lf.labels])
    op = source.make_inverse(lf, alpha)
    return source.sloreta(op, x), source.minimum_norm_power(op, x)


@_stage("localize")
def _localize(cfg, recs, averages, out: _Writer) -> None:
    lf = None
    for task in recs:
        montage = recs[task].montage
        if lf is None or lf.labels != montage.scalp_labels:
            head = source.HeadModel()
            lf = source.build_lead_field(montage, head, source.VoxelGrid.build(head, cfg.source_spacing_m))
        avg = averages[(task, None)]
        comp = erp.detect_component(avg, cfg.source_component, cfg.source_channel)
        sl, mn = localize_average(avg, montage, comp.latency_ms, cfg.source_alpha, lf=lf)
        for smap in (sl, mn):
            stem = f"source/{task}_{smap.method}"
            out.text(stem + ".csv", smap.to_csv())
            out.text(stem + "_summary.csv", smap.summary_csv())


def run_pipeline(cfg: PipelineConfig) -> list:
    """Run every stage; returns manifest rows ``(path, bytes, sha256)``."""
    out_dir = Path(cfg.output_dir)
    try:
        out_dir.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"cannot create output directory {out_dir}: {exc}") from None
    out = _Writer(out_dir)
    if cfg.synth is not None:
        recs = _synth(cfg, out)
    else:
        recs = {t: _stage("load")(read_recording)(cfg.inputs[t]) for t in cfg.tasks}
    epochs = _preprocess(cfg, recs, out)
    averages, rows = _erp(cfg, recs, epochs, out)
    _stats(cfg, recs, rows, out)
    _topo(cfg, recs, averages, out)
    _localize(cfg, recs, averages, out)
    return out.manifest()
