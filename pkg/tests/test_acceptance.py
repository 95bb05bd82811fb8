"""Acceptance suite. Each test prints one PASS/FAIL line, then asserts.

Run with ``pytest tests/test_acceptance.py -v`` (add ``-s`` to keep the lines
in order with pytest's own output).
"""

import time

import numpy as np
import pytest

from recovery import recover
from wmerp.erp import average_epochs, cluster_amplitude
from wmerp.pipeline import demo_config_text, parse_config, run_pipeline
from wmerp.preprocess import (apply_filter, baseline_correct, preprocess_recording,
                              reject_artifacts)
from wmerp.signal_core import Epoch, Event, Montage, Recording
from wmerp.source import HeadModel, VoxelGrid, benchmark_localization, build_lead_field
from wmerp.stats import behavior_summary, p_from_t
from wmerp.synth import ParadigmSpec, bundled_scenarios, generate_events, synthesize_recording


@pytest.fixture
def report(capsys):
    def emit(number, title, ok, detail, started):
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {title} | {detail} | {time.perf_counter() - started:.1f} s"
        with capsys.disabled():
            print("\n" + line)
        return ok
    return emit


@pytest.fixture(scope="module")
def lead_field():
    head = HeadModel()
    return build_lead_field(Montage.default(), head, VoxelGrid.build(head, 0.01))


def test_criterion_1_sloreta_zero_error(report, lead_field):
    t0 = time.perf_counter()
    res = benchmark_localization(lead_field, None, None, alpha=0.0, seed=0)["sloreta"]
    n = len(res.errors)
    exact = int(np.sum(res.errors == 0.0))
    ok = n >= 200 and exact == n
    report(1, "noise-free sLORETA on every eligible voxel", ok,
           f"{exact}/{n} dipoles with zero error, max error {res.max:.4f} m", t0)
    assert ok


def test_criterion_2_sloreta_beats_minimum_norm(report, lead_field):
    t0 = time.perf_counter()
    res = benchmark_localization(lead_field, 300, snr=10.0, alpha=0.0, seed=1)
    sl, mn = res["sloreta"].mean, res["minimum_norm"].mean
    ok = len(res["sloreta"].errors) >= 200 and sl <= mn
    report(2, "sLORETA <= minimum norm at SNR 10", ok,
           f"300 trials, mean error sLORETA {sl:.4f} m vs minimum norm {mn:.4f} m", t0)
    assert ok


REFERENCE = [(1.27, 0.2086), (2.7, 0.009), (2.05, 0.0441), (0.03, 0.9705)]


def test_criterion_3_p_value_oracle(report):
    t0 = time.perf_counter()
    diffs = [(t, p, p_from_t(t, 58)) for t, p in REFERENCE]
    ok = all(abs(got - p) <= 0.002 for _, p, got in diffs)
    detail = "; ".join(f"t={t}: {got:.4f} vs {p} ({'ok' if abs(got - p) <= 0.002 else 'off'})"
                       for t, p, got in diffs)
    report(3, "two-tailed p at df=58 within 0.002 of the printed values", ok, detail, t0)
    assert ok


def test_criterion_4_behaviour(report):
    t0 = time.perf_counter()
    got = {}
    for task, p, seed in (("inhibition", 0.875, 0), ("set_shifting", 0.595, 1)):
        ev = generate_events(ParadigmSpec(task, 10_000, accuracy_p=p, seed=seed))
        got[task] = behavior_summary(ev, task).accuracy_pct
    ok = abs(got["inhibition"] - 87.5) <= 1 and abs(got["set_shifting"] - 59.5) <= 1
    report(4, "simulated accuracy over 10 000 trials", ok,
           f"inhibition {got['inhibition']:.2f} %, set-shifting {got['set_shifting']:.2f} %", t0)
    assert ok


def test_criterion_5_component_recovery(report):
    t0 = time.perf_counter()
    results = []
    for kind, latency in (("N200", 200.0), ("P200", 180.0), ("P300", 300.0)):
        results.extend(recover(kind, latency, 5.0, n_trials=100, seed=0))
    ok = all(r.latency_error_ms <= 2 and r.amplitude_error <= 0.10 for r in results)
    detail = "; ".join(f"{r.kind}@{r.channel} {r.latency_ms:g} ms {100 * r.amplitude_error:.1f} %"
                       for r in results)
    report(5, "N200/P200/P300 recovery at 5 uV noise, 100 trials", ok, detail, t0)
    assert ok


def test_criterion_6_inhibition_smaller_than_set_shifting(report):
    t0 = time.perf_counter()
    amps = {}
    for i, ts in enumerate(bundled_scenarios(200, seed=0)):
        task = ts.paradigm.task
        rec = synthesize_recording(generate_events(ts.paradigm), ts.sources, seed=100 + i)
        epochs, _, _, _ = preprocess_recording(rec, task)
        avg = average_epochs(epochs, task, None, rec.labels)
        amps[task] = {c: cluster_amplitude(avg, c, "P300") for c in ("frontal", "parietal")}
    ok = all(amps["inhibition"][c] < amps["set_shifting"][c] for c in ("frontal", "parietal"))
    detail = ", ".join(f"{c}: {amps['inhibition'][c]:.2f} < {amps['set_shifting'][c]:.2f} uV"
                       for c in ("frontal", "parietal"))
    report(6, "inhibition P300 cluster amplitude below set-shifting", ok, detail, t0)
    assert ok


def _epoch(data):
    return Epoch(Event(1000, "inhibition", "stimulus"), np.atleast_2d(data), 1000.0, (-100.0, 700.0))


def test_criterion_7_preprocessing_invariants(report):
    t0 = time.perf_counter()
    rng = np.random.default_rng(0)
    checks = {}

    def rec(x):
        return Recording(np.atleast_2d(x), Montage.from_labels(["Fz"]), 1000.0)

    x, y = rng.normal(0, 20, (2, 5000))
    worst = 0.0
    for a, b in rng.uniform(-50, 50, (20, 2)):
        lhs = apply_filter(rec(a * x + b * y)).data
        rhs = a * apply_filter(rec(x)).data + b * apply_filter(rec(y)).data
        worst = max(worst, np.max(np.abs(lhs - rhs)) / np.max(np.abs(rhs)))
    checks["linearity"] = worst <= 1e-6

    t = (np.arange(6001) - 3000) / 1000.0
    out = apply_filter(rec(20 * np.exp(-0.5 * (t / 0.015) ** 2))).data[0]
    core = out[2000:4001]
    checks["zero-phase"] = (int(np.argmax(out)) == 3000
                            and np.max(np.abs(core - core[::-1])) <= 1e-5 * out.max())

    raw = _epoch(rng.normal(5, 3, (3, 800)))
    once = baseline_correct(raw)
    checks["baseline idempotence"] = np.allclose(baseline_correct(once).data, once.data, atol=1e-12)

    edge = np.zeros((2, 3, 800))
    edge[0, 1, 400] = 74.9
    edge[1, 2, 123] = -80.0
    flagged, _ = reject_artifacts([_epoch(e) for e in edge], 75.0)
    checks["75 uV boundary"] = [e.rejected for e in flagged] == [False, True]

    injected = rng.permutation(1000) < 300
    epochs = []
    for k in range(1000):
        d = rng.normal(0, 5, (4, 800))
        if injected[k]:
            d[rng.integers(4), rng.integers(800)] = 150.0 * rng.choice([-1, 1])
        epochs.append(_epoch(d))
    flagged, rep = reject_artifacts(epochs, 75.0)
    checks["30 % injection"] = rep.n_rejected == 300 and [e.rejected for e in flagged] == list(injected)

    ok = all(checks.values())
    report(7, "preprocessing invariants", ok,
           ", ".join(f"{k} {'ok' if v else 'FAILED'}" for k, v in checks.items()), t0)
    assert ok


def test_criterion_8_determinism(report, tmp_path):
    t0 = time.perf_counter()
    manifests = []
    for name in ("a", "b"):
        cfg = parse_config(demo_config_text(), tmp_path / name)
        run_pipeline(cfg)
        manifests.append((tmp_path / name / "demo_out" / "manifest.csv").read_bytes())
    ok = manifests[0] == manifests[1]
    n_files = manifests[0].count(b"\n") - 1
    report(8, "two demo runs give identical manifests", ok,
           f"{n_files} files, manifests {'identical' if ok else 'differ'}", t0)
    assert ok
