#!/usr/bin/env python3
"""Run every config in configs/ and print one line per experiment.

    python3 scripts/run_all.py [--configs DIR] [--out DIR] [--threads N]
"""

import argparse
import sys
import time
from pathlib import Path

from ncasp.experiments import ExperimentConfig, run_experiment, write_artifacts


def main() -> int:
    root = Path(__file__).resolve().parent.parent
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--configs", default=root / "configs", type=Path)
    ap.add_argument("--out", default=Path("runs"), type=Path)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args()

    ok = True
    for path in sorted(args.configs.glob("*.json")):
        cfg = ExperimentConfig.load(path)
        t0 = time.perf_counter()
        res = run_experiment(cfg, threads=args.threads)
        out = write_artifacts(cfg, res, args.out / path.stem)
        status = "PASS" if res.passed else "FAIL"
        print(f"{status} {path.stem:20s} {time.perf_counter() - t0:6.1f} s -> {out}")
        ok &= res.passed
    return 0 if ok else 1


if __name__ == "__main__":
    sys.exit(main())
