"""Masks, blobs, and the cleanup filters.

Generates a clean synthetic tree, degrades it into a noisy prediction, and
walks it through the pre-filter chain and the Y-shaped tree filter.
"""

import numpy as np

from treeloop.filters import atl_pre_filter, scaled_config, y_shaped_tree_filter
from treeloop.mask import connected_components, row_runs, to_partial_skeleton
from treeloop.synthetic import DEFAULT_DEGRADATION, generate_ground_truth, degrade

SIZE = (96, 96)

truth, params = generate_ground_truth(1, seed=4, size=SIZE)[0]
cfg = scaled_config(*SIZE)

print(f"ground truth: {truth.sum()} px, {len(connected_components(truth))} blob(s)")
print(f"row runs: {len(row_runs(truth))}, skeleton points: {len(to_partial_skeleton(truth))}")

noisy = degrade(truth, DEFAULT_DEGRADATION.scaled(0.9, rng_seed=2))
blobs = connected_components(noisy)
print(f"\ndegraded prediction: {noisy.sum()} px, {len(blobs)} blobs")
for b in blobs:
    print(f"  blob {b.label}: {b.pixel_count} px, bbox {b.width}x{b.height}, "
          f"centroid ({b.centroid_x:.1f}, {b.centroid_y:.1f})")

pre = atl_pre_filter(noisy, cfg)
print(f"\nafter pre-filter: {len(connected_components(pre.mask))} blob(s), "
      f"trunk at x={pre.trunk.t_pos}, warnings: {list(pre.warnings)}")

res = y_shaped_tree_filter(noisy, cfg)
print(f"Y filter on the raw prediction: passes={res.passes}")
res = y_shaped_tree_filter(truth, cfg)
print(f"Y filter on the clean truth:    passes={res.passes}")
