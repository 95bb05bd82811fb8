"""Latency and amplitude recovery of single injected components across noise levels.

    python scripts/component_recovery.py [--seeds 10]
"""

import argparse
import sys
from pathlib import Path

sys.path.insert(0, str(Path(__file__).resolve().parents[1] / "tests"))
from recovery import recover  # noqa: E402


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--seeds", type=int, default=10)
    ap.add_argument("--trials", type=int, default=100)
    args = ap.parse_args()
    print("kind,noise_uv,worst_latency_error_ms,worst_amplitude_error,failures,runs")
    for kind, lat in (("N200", 200.0), ("P200", 180.0), ("P300", 300.0)):
        for noise in (2.0, 5.0, 10.0):
            res = [r for s in range(args.seeds) for r in recover(kind, lat, noise, args.trials, s)]
            fails = sum(r.latency_error_ms > 2 or r.amplitude_error > 0.1 for r in res)
            print(f"{kind},{noise},{max(r.latency_error_ms for r in res):g},"
                  f"{max(r.amplitude_error for r in res):.3f},{fails},{len(res)}")


if __name__ == "__main__":
    main()
