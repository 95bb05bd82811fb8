"""Paired t-tests, Student-t p-values, latency ratios and behavioural summaries."""

from __future__ import annotations

import csv
import io
import math
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from .signal_core import DataError, Event


class NumericalError(ArithmeticError):
    """An iterative evaluation failed to converge."""


def _betacf(a: float, b: float, x: float, tol: float = 1e-12, max_iter: int = 10_000) -> float:
    # modified Lentz evaluation of the incomplete-beta continued fraction
    tiny = 1e-300
    qab, qap, qam = a + b, a + 1.0, a - 1.0
    c = 1.0
    d = 1.0 - qab * x / qap
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, max_iter + 1):
        m2 = 2 * m
        aa = m * (b - m) * x / ((qam + m2) * (a + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        h *= d * c
        aa = -(a + m) * (qab + m) * x / ((a + m2) * (qap + m2))
        d = 1.0 + aa * d
        d = tiny if abs(d) < tiny else d
        c = 1.0 + aa / c
        c = tiny if abs(c) < tiny else c
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            return h
    raise NumericalError(f"incomplete beta did not converge (a={a}, b={b}, x={x})")


def betainc(a: float, b: float, x: float) -> float:
    """Regularized incomplete beta function I_x(a, b)."""
    if not 0.0 <= x <= 1.0:
        raise ValueError("x must lie in [0, 1]")
    if x == 0.0 or x == 1.0:
        return x
    log_front = (math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
                 + a * math.log(x) + b * math.log1p(-x))
    front = math.exp(log_front)
    # the fraction converges fast only on this side of the mean
    if x < (a + 1.0) / (a + b + 2.0):
        return front * _betacf(a, b, x) / a
    return 1.0 - front * _betacf(b, a, 1.0 - x) / b


def p_from_t(t: float, df: int) -> float:
    """Two-tailed p-value of Student's t with ``df`` degrees of freedom."""
    if df < 1:
        raise ValueError("df must be >= 1")
    if math.isinf(t):
        return 0.0
    if math.isnan(t):
        raise ValueError("t is NaN")
    return betainc(df / 2.0, 0.5, df / (df + t * t))


@dataclass(frozen=True)
class PairedTTestResult:
    t: float
    df: int
    p_two_tailed: float
    sed: float
    n: int
    mean_diff: float = 0.0

    @property
    def degenerate(self) -> bool:
        return self.sed == 0.0


def paired_t_test(a: Sequence[float], b: Sequence[float]) -> PairedTTestResult:
    """Paired t-test of ``a`` against ``b``.

    If every difference is equal the standard error is zero; the result is
    then flagged degenerate with t = +/-inf (or 0 when the differences are all
    zero) instead of raising.
    """
    a = np.asarray(a, dtype=float)
    b = np.asarray(b, dtype=float)
    if a.shape != b.shape or a.ndim != 1:
        raise ValueError("paired samples must be 1-D and of equal length")
    n = len(a)
    if n < 2:
        raise ValueError("paired t-test needs at least two pairs")
    d = a - b
    mean = float(d.mean())
    sed = float(d.std(ddof=1) / math.sqrt(n))
    # differences equal to rounding: treat as zero spread
    if sed <= 1e-14 * max(1.0, float(np.max(np.abs(d)))):
        t = 0.0 if mean == 0 else math.copysign(math.inf, mean)
        return PairedTTestResult(t, n - 1, p_from_t(t, n - 1), 0.0, n, mean)
    t = mean / sed
    return PairedTTestResult(t, n - 1, p_from_t(t, n - 1), sed, n, mean)


def latency_ratio(c1, c2) -> float:
    if c2.latency_ms == 0:
        raise ValueError("denominator component has zero latency")
    return c1.latency_ms / c2.latency_ms


@dataclass(frozen=True)
class BehaviorSummary:
    task: str
    accuracy_pct: float
    mean_rt_ms: Optional[float]
    n_trials: int


def behavior_summary(events: Sequence[Event], task: str) -> BehaviorSummary:
    responded = [e for e in events if e.task == task and e.response != "none"]
    if not responded:
        raise DataError(f"no responded trials for task {task!r}")
    correct = sum(e.response == "correct" for e in responded)
    rts = [e.rt_ms for e in events if e.task == task and e.rt_ms is not None]
    mean_rt = float(np.mean(rts)) if rts else None
    return BehaviorSummary(task, 100.0 * correct / len(responded), mean_rt, len(responded))


# -- comparisons over the component table ------------------------------------------

# condition pairs compared per task, in report order
CONDITION_PAIRS = {
    "inhibition": [("stimulus", "distracter")],
    "set_shifting": [("similar", "pair"), ("similar", "process"), ("pair", "process")],
}
TASK_KINDS = {"inhibition": ("P300", "N200"), "set_shifting": ("P300", "P200")}
# numerator/denominator components for the per-task latency ratio
LATENCY_RATIOS = {"inhibition": ("N200", "P300"), "set_shifting": ("P200", "P300")}

REPORT_FIELDS = ["task", "electrode_cluster", "component", "value1", "value2", "t", "df", "sed", "p"]


def compare_conditions(rows, clusters: dict) -> list:
    """Paired comparisons between conditions across the channels of a cluster.

    ``rows`` are ``(task, condition, ErpComponent)`` triples. For every task,
    cluster and condition pair, amplitudes (and the task's latency ratio) are
    paired by channel. Returns report dictionaries in a fixed order.
    """
    table = {}
    for task, cond, comp in rows:
        table[(task, cond, comp.kind, comp.channel)] = comp
    tasks = [t for t in CONDITION_PAIRS if any(k[0] == t for k in table)]
    conds = {t: {k[1] for k in table if k[0] == t} for t in tasks}
    if not tasks or all(len(c) < 2 for c in conds.values()):
        raise DataError("need two conditions to compare")
    out = []
    for task in tasks:
        for cname, channels in clusters.items():
            for c1, c2 in CONDITION_PAIRS[task]:
                if c1 not in conds[task] or c2 not in conds[task]:
                    continue

                def get(cond, kind):
                    try:
                        return [table[(task, cond, kind, ch)] for ch in channels]
                    except KeyError as exc:
                        raise DataError(f"missing component {exc.args[0]}") from None

                for kind in TASK_KINDS[task]:
                    a = [c.amplitude_uv for c in get(c1, kind)]
                    b = [c.amplitude_uv for c in get(c2, kind)]
                    out.append(_report_row(task, cname, kind, c1, c2, a, b))
                num, den = LATENCY_RATIOS[task]
                ra = [latency_ratio(x, y) for x, y in zip(get(c1, num), get(c1, den))]
                rb = [latency_ratio(x, y) for x, y in zip(get(c2, num), get(c2, den))]
                out.append(_report_row(task, cname, f"{num}/{den} latency ratio", c1, c2, ra, rb))
    return out


def _report_row(task, cluster, component, c1, c2, a, b) -> dict:
    res = paired_t_test(a, b)
    return {
        "task": task, "electrode_cluster": cluster, "component": component,
        "value1": f"{c1} {component}", "value2": f"{c2} {component}",
        "t": res.t, "df": res.df, "sed": res.sed, "p": res.p_two_tailed,
    }


def report_to_csv(report) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_FIELDS)
    for r in report:
        w.writerow([r["task"], r["electrode_cluster"], r["component"], r["value1"], r["value2"],
                    repr(float(r["t"])), r["df"], repr(float(r["sed"])), repr(float(r["p"]))])
    return buf.getvalue()


def behavior_to_csv(summaries) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(["task", "accuracy_pct", "mean_rt_ms", "n_trials"])
    for s in summaries:
        w.writerow([s.task, repr(s.accuracy_pct), "" if s.mean_rt_ms is None else repr(s.mean_rt_ms),
                    s.n_trials])
    return buf.getvalue()
