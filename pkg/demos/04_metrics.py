"""Scoring predictions: mIOU, boundary F1, and the Complete Grid Scan.

Reproduces the qualitative good-vs-bad comparison: a mildly jittered
prediction against one with disconnections and noise.  mIOU barely
separates them; BF1 and CGS do.
"""

from treeloop.metrics import score_pair
from treeloop.synthetic import DegradationConfig, degrade, generate_ground_truth

SIZE = (96, 96)

truth, _ = generate_ground_truth(1, seed=29, size=SIZE)[0]
good = degrade(truth, DegradationConfig(thickness_jitter_sigma=0.5, rng_seed=1))
bad = degrade(
    truth,
    DegradationConfig(
        gap_count=3.0,
        gap_length=(3, 7),
        noise_blob_count=5.0,
        noise_blob_side=(2, 4),
        thickness_jitter_sigma=1.0,
        rng_seed=2,
    ),
)

print(f"{'':8s} {'mIOU':>8s} {'BF1':>8s} {'CGS':>8s} {'CGS_h':>8s} {'CGS_v':>8s} {'ne_h':>5s}")
for name, pred in (("good", good), ("bad", bad)):
    r = score_pair(pred, truth)
    print(f"{name:8s} {r.miou:8.4f} {r.bf1:8.4f} {r.cgs:8.4f} {r.cgs_h:8.4f} {r.cgs_v:8.4f} {r.ne_h:5d}")
