"""The 14-parameter Y template and GA fitting.

Rasterizes a known template, thins its skeleton, and lets the GA recover
the parameters from the surviving row centers.
"""

import numpy as np

from treeloop.gafit import GaConfig, fit_tree, fitness_mae
from treeloop.mask import PartialSkeleton, to_partial_skeleton
from treeloop.synthetic import generate_ground_truth
from treeloop.template import build_curves, curve_row_domains, evaluate

SIZE = (96, 96)

truth_mask, truth_params = generate_ground_truth(1, seed=17, size=SIZE)[0]
curves = build_curves(truth_params, SIZE[0])
print("template at a few rows:")
for y in (0, 20, int(truth_params.c_p0y) + 1, 70, 95):
    vals = ", ".join(f"{cid}={x:.1f}" for cid, x in evaluate(curves, float(y)))
    print(f"  y={y:3d}: {vals}")

skeleton = to_partial_skeleton(truth_mask)
rng = np.random.default_rng(0)
keep = rng.random(len(skeleton)) > 0.4  # drop 40% of the points
sparse = PartialSkeleton(ys=skeleton.ys[keep], centers=skeleton.centers[keep])
print(f"\nskeleton: {len(skeleton)} points, fitting on {len(sparse)}")

cfg = GaConfig(population_size=200, generations=80, rng_seed=5)
result = fit_tree(sparse, cfg, SIZE)
print(f"GA best fitness (per-row MAE): {result.fitness:.3f} px "
      f"after {result.evaluations} evaluations")
print(f"true MAE of the recovered template vs the full skeleton: "
      f"{fitness_mae(result.params, skeleton, SIZE):.3f} px")

print("\nrecovered vs true parameters:")
for name, got, want in zip(
    ("t_px", "c_p0x", "c_p0y", "b1_p2x", "b2_p2x"),
    (result.params.t_px, result.params.c_p0x, result.params.c_p0y,
     result.params.b1_p2x, result.params.b2_p2x),
    (truth_params.t_px, truth_params.c_p0x, truth_params.c_p0y,
     truth_params.b1_p2x, truth_params.b2_p2x),
):
    print(f"  {name:7s} fitted {got:6.1f}   true {want:6.1f}")
