"""Run the bundled demo config and print the manifest summary.

    python scripts/run_demo.py [--out DIR] [--seed N]
"""

import argparse
from pathlib import Path

from wmerp.pipeline import demo_config_text, parse_config, run_pipeline


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--out", default="demo_out")
    ap.add_argument("--seed", type=int)
    args = ap.parse_args()
    cfg = parse_config(demo_config_text(), Path.cwd(), args.seed)
    cfg.output_dir = Path(args.out)
    rows = run_pipeline(cfg)
    total = sum(size for _, size, _ in rows)
    print(f"{len(rows)} files, {total} bytes -> {cfg.output_dir / 'manifest.csv'}")
    report = cfg.output_dir / "stats" / "stats_report.csv"
    print(report.read_text())


if __name__ == "__main__":
    main()
