"""Template-guided repair of a broken prediction.

Cuts gaps into a tree, fits the template to what survives, and repairs the
mask by generating the missing thickness rows along the fitted curves.
"""

from treeloop.filters import atl_pre_filter, scaled_config
from treeloop.gafit import GaConfig, fit_tree
from treeloop.mask import connected_components, to_partial_skeleton
from treeloop.repair import GENERATED, RepairConfig, fill_thickness, measure_thickness, repair
from treeloop.synthetic import DegradationConfig, degrade, generate_ground_truth
from treeloop.template import build_curves

SIZE = (96, 96)
cfg = scaled_config(*SIZE)

truth, _ = generate_ground_truth(1, seed=23, size=SIZE)[0]
broken = degrade(truth, DegradationConfig(gap_count=3.0, gap_length=(4, 8), rng_seed=6))
print(f"truth: {len(connected_components(truth))} blob(s); "
      f"broken: {len(connected_components(broken))} blobs")

pre = atl_pre_filter(broken, cfg)
fit = fit_tree(to_partial_skeleton(pre.mask),
               GaConfig(population_size=200, generations=80, rng_seed=1), SIZE)
print(f"fit MAE: {fit.fitness:.3f} px")

rcfg = RepairConfig()
profile = fill_thickness(measure_thickness(pre.mask, build_curves(fit.params, SIZE[0]), rcfg), rcfg)
for cid, p in profile.curves.items():
    generated = int((p.state == GENERATED).sum())
    print(f"  {cid}: {len(p.ys)} rows, {generated} generated")

outcome = repair(pre.mask, fit, cfg, rcfg)
print(f"\nrepair accepted: {outcome.accepted}  "
      f"reconstructed fraction: {outcome.reconstructed_fraction:.3f}")
if outcome.accepted:
    print(f"repaired mask: {len(connected_components(outcome.mask))} blob, "
          f"{outcome.mask.sum()} px (input had {pre.mask.sum()})")
