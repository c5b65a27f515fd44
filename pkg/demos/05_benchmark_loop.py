"""A miniature end-to-end run of the iterative loop.

Initializes a small synthetic benchmark in a temp directory and compares
the three self-training variants over it.  The full-size benchmark is
`treeloop benchmark init/compare`.
"""

import json
import tempfile
from pathlib import Path

from treeloop.benchmark import init_benchmark, run_benchmark

with tempfile.TemporaryDirectory() as tmp:
    root = Path(tmp) / "bench"
    init_benchmark(
        root, pool_size=24, seed_count=6, val_count=6,
        size=(96, 96), batch_size=6, max_iterations=8, master_seed=13,
    )
    print(f"benchmark at {root}: 24-image pool, 6 seeds, 6 validation images")

    result = run_benchmark(root, rng_seeds=(1,), jobs=1)
    print("\nsuccessful-label summary:")
    for row in result["summary"]:
        metrics = row["metrics"]
        cgs = f"{metrics['CGS']:.4f}" if metrics["CGS"] is not None else "   -  "
        print(
            f"  {row['mode']:>12s}: {row['successful']:2d}/{row['initial_unlabeled']} "
            f"successful ({row['successful_fraction']:.1%}), label CGS {cgs}"
        )

    print("\nper-iteration validation CGS (from reports/iterations.csv):")
    import csv

    with (root / "reports" / "iterations.csv").open() as fh:
        for r in csv.DictReader(fh):
            if r["val_CGS"]:
                print(f"  {r['mode']:>5s} iter {r['iteration']:>2s}: "
                      f"train {r['train_size']:>3s}  val CGS {float(r['val_CGS']):.4f}")
