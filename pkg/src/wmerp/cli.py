"""Command-line entry point. Each subcommand wraps one module.

Exit codes: 0 success, 2 config/usage error, 3 data error, 4 numerical failure.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from . import erp, pipeline, preprocess, source, stats, synth
from .signal_core import (CLUSTERS, TASKS, DataError, Montage, epochs_to_recording,
                          read_recording, recording_to_epochs, write_recording)

log = logging.getLogger("wmerp")


def cmd_synth(args) -> int:
    scen = dict(zip(TASKS, synth.bundled_scenarios(args.trials, args.seed)))[args.task]
    sources = synth.SourceScenario(scen.sources.components, args.noise, args.blink_rate)
    events = synth.generate_events(scen.paradigm)
    rec = synth.synthesize_recording(events, sources, seed=args.seed)
    base = Path(args.out) / args.task
    write_recording(rec, base)
    print(f"wrote {base}.erph/.erpd/.events.csv ({rec.data.shape[0]} channels, {rec.n_samples} samples)")
    return 0


def cmd_preprocess(args) -> int:
    rec = read_recording(args.inp)
    task = args.task or (rec.events[0].task if rec.events else None)
    if task is None:
        raise DataError("recording has no events")
    spec = (preprocess.FilterSpec.literal_lowpass() if args.literal_lowpass
            else preprocess.FilterSpec(cutoff_hz=args.cutoff))
    epochs, report, n_removed, skipped = preprocess.preprocess_recording(
        rec, task, spec, args.ocular_threshold, args.threshold)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    report.write(out / f"{task}_rejection.csv")
    kept = [e for e in epochs if not e.rejected]
    if not kept:
        raise DataError("every epoch was rejected")
    write_recording(epochs_to_recording(kept, rec.montage), out / f"{task}_epochs")
    print(f"{task}: {report.n_total} epochs, {report.n_rejected} rejected, "
          f"{n_removed} ocular components removed, {len(skipped)} skipped at boundaries")
    return 0


def cmd_erp(args) -> int:
    rec = read_recording(args.inp)
    epochs = recording_to_epochs(rec)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    channels = args.channels or [c for members in CLUSTERS.values() for c in members]
    rows = []
    for task in sorted({e.event.task for e in epochs}, key=TASKS.index):
        conds = sorted({e.event.condition for e in epochs if e.event.task == task})
        for cond in (*conds, None):
            avg = erp.average_epochs(epochs, task, cond, rec.montage.labels)
            (out / f"{avg.group}_average.csv").write_text(erp.average_to_csv(avg), encoding="utf-8")
            if cond is not None:
                for kind in pipeline.component_kinds(task):
                    rows.extend((task, cond, erp.detect_component(avg, kind, ch)) for ch in channels)
    (out / "components.csv").write_text(erp.components_to_csv(rows), encoding="utf-8")
    print(f"wrote averages and {len(rows)} components to {out}")
    return 0


def cmd_stats(args) -> int:
    rows = erp.read_components_csv(args.inp)
    report = stats.compare_conditions(rows, CLUSTERS)
    text = stats.report_to_csv(report)
    if args.out:
        Path(args.out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)
    return 0


def cmd_topo(args) -> int:
    avg = erp.read_average_csv(args.inp)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    montage = Montage.from_labels(avg.labels, [l for l in avg.labels if l.endswith("EOG")])
    stem = Path(args.inp).name.removesuffix(".csv")
    for lat in args.latencies:
        grid = erp.topo_snapshot(avg, lat, args.resolution, montage)
        (out / f"{stem}_{lat:g}ms.csv").write_text(grid.to_csv(), encoding="utf-8")
        (out / f"{stem}_{lat:g}ms.pgm").write_bytes(grid.to_pgm())
    print(f"wrote {len(args.latencies)} grids to {out}")
    return 0


def cmd_localize(args) -> int:
    avg = erp.read_average_csv(args.inp)
    montage = Montage.from_labels(avg.labels, [l for l in avg.labels if l.endswith("EOG")])
    latency = args.latency
    if latency is None:
        latency = erp.detect_component(avg, args.component, args.channel).latency_ms
    sl, mn = pipeline.localize_average(avg, montage, latency, args.alpha, args.spacing)
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    stem = Path(args.inp).name.removesuffix(".csv")
    for smap in (sl, mn):
        (out / f"{stem}_{smap.method}.csv").write_text(smap.to_csv(), encoding="utf-8")
        (out / f"{stem}_{smap.method}_summary.csv").write_text(smap.summary_csv(), encoding="utf-8")
    print(f"latency {latency:g} ms; sLORETA peak at {sl.grid.voxels[sl.argmax()].round(3).tolist()} m")
    return 0


def cmd_bench(args) -> int:
    head = source.HeadModel()
    lf = source.build_lead_field(Montage.default(), head, source.VoxelGrid.build(head, args.spacing))
    snr = None if args.noise == 0 else 1.0 / args.noise
    n = None if args.dipoles == 0 else args.dipoles
    res = source.benchmark_localization(lf, n, snr, args.alpha, args.seed)
    n_cases = len(next(iter(res.values())).errors)
    print(f"dipoles={n_cases} noise={args.noise} alpha={args.alpha}")
    print("method,mean_error_m,max_error_m")
    for method, r in res.items():
        print(f"{method},{r.mean:.6f},{r.max:.6f}")
    return 0


def cmd_run(args) -> int:
    if args.demo:
        cfg = pipeline.parse_config(pipeline.demo_config_text(), Path.cwd(), args.seed)
    elif args.config:
        cfg = pipeline.load_config(args.config, args.seed)
    else:
        raise pipeline.ConfigError("run needs --config FILE or --demo")
    if args.out:
        cfg.output_dir = Path(args.out)
    rows = pipeline.run_pipeline(cfg)
    print(f"wrote {len(rows)} files; manifest at {Path(cfg.output_dir) / 'manifest.csv'}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="wmerp", description="ERP analysis and source localization pipeline.")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", help="simulate a task recording")
    s.add_argument("--task", choices=TASKS, required=True)
    s.add_argument("--trials", type=int, default=200)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--noise", type=float, default=5.0, help="white noise sigma in µV")
    s.add_argument("--blink-rate", type=float, default=6.0, help="blinks per minute")
    s.add_argument("--out", required=True, help="output directory")
    s.set_defaults(func=cmd_synth)

    s = sub.add_parser("preprocess", help="filter, remove ocular components, epoch, reject")
    s.add_argument("--in", dest="inp", required=True, help="recording base path")
    s.add_argument("--task", choices=TASKS)
    s.add_argument("--cutoff", type=float, default=1.0, help="high-pass cutoff in Hz")
    s.add_argument("--literal-lowpass", action="store_true", help="use a 1 Hz low-pass instead")
    s.add_argument("--threshold", type=float, default=75.0, help="rejection threshold in µV")
    s.add_argument("--ocular-threshold", type=float, default=0.8, help="|r| with EOG to drop a component")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_preprocess)

    s = sub.add_parser("erp", help="average epochs and detect N200/P200/P300")
    s.add_argument("--in", dest="inp", required=True, help="epochs base path written by preprocess")
    s.add_argument("--channels", nargs="+")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_erp)

    s = sub.add_parser("stats", help="paired t-tests between conditions")
    s.add_argument("--in", dest="inp", required=True, help="components.csv")
    s.add_argument("--out", help="report path (default: stdout)")
    s.set_defaults(func=cmd_stats)

    s = sub.add_parser("topo", help="scalp grids from an average CSV")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--latencies", type=float, nargs="+", default=[100.0, 200.0, 300.0])
    s.add_argument("--resolution", type=int, default=67)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_topo)

    s = sub.add_parser("localize", help="sLORETA and minimum-norm maps from an average CSV")
    s.add_argument("--in", dest="inp", required=True)
    s.add_argument("--latency", type=float, help="ms; default: peak of --component on --channel")
    s.add_argument("--component", default="P300", choices=list(erp.COMPONENT_WINDOWS))
    s.add_argument("--channel", default="Pz")
    s.add_argument("--alpha", type=float, default=0.0)
    s.add_argument("--spacing", type=float, default=0.01)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_localize)

    s = sub.add_parser("bench-localization", help="localization error sweep over on-grid dipoles")
    s.add_argument("--noise", type=float, default=0.0, help="noise/signal norm ratio (0 = noise-free)")
    s.add_argument("--dipoles", type=int, default=200, help="0 sweeps every eligible voxel")
    s.add_argument("--alpha", type=float, default=0.0)
    s.add_argument("--spacing", type=float, default=0.01)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(func=cmd_bench)

    s = sub.add_parser("run", help="full pipeline from a config file")
    s.add_argument("--config")
    s.add_argument("--demo", action="store_true", help="use the bundled demo config")
    s.add_argument("--seed", type=int, help="override the config seed")
    s.add_argument("--out", help="override the output directory")
    s.set_defaults(func=cmd_run)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stdout)
    try:
        return args.func(args)
    except Exception as exc:  # noqa: BLE001 - mapped to an exit status
        if not isinstance(exc, (ValueError, ArithmeticError, OSError, RuntimeError,
                                np.linalg.LinAlgError, KeyError)):
            raise
        print(f"error: {exc}", file=sys.stderr)
        if isinstance(exc, OSError):
            return pipeline.EXIT_DATA
        return pipeline.exit_code_for(exc)


if __name__ == "__main__":
    sys.exit(main())
