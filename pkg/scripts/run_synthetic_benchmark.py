#!/usr/bin/env python3
"""Run the desk-scale synthetic benchmark end to end and print the metrics."""

import argparse
import json
from pathlib import Path

from cdgan.benchmark import BenchmarkConfig, run_synthetic_benchmark


def main():
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="runs/benchmark")
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--max-steps", type=int, default=20000)
    parser.add_argument("--eval-every", type=int, default=500)
    parser.add_argument("--base-width", type=int, default=16)
    parser.add_argument("--train-count", type=int, default=512)
    parser.add_argument("--batch-size", type=int, default=16)
    parser.add_argument("--variant", default="cd-GAN")
    args = parser.parse_args()

    cfg = BenchmarkConfig(
        out_dir=Path(args.out),
        seed=args.seed,
        max_steps=args.max_steps,
        eval_every=args.eval_every,
        base_width=args.base_width,
        train_count=args.train_count,
        batch_size=args.batch_size,
        variant=args.variant,
    )
    result = run_synthetic_benchmark(cfg)
    print(json.dumps({k: v for k, v in result.items() if k != "progress"}, indent=2))
    out = Path(args.out) / "benchmark_result.json"
    out.write_text(json.dumps(result, indent=2))
    print(f"full result written to {out}")


if __name__ == "__main__":
    main()
