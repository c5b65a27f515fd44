"""Synthetic stand-in for the orchard data and the segmentation model.

Ground truth is sampled from plausible Y-tree templates and rasterized with
smooth per-row thickness, so every truth mask is a single connected blob
passing the Y filter.  ``degrade`` turns a truth mask into a CNN-prediction
lookalike: limb gaps, noise specks, a pole, a neighbor-tree fragment, and
thickness jitter — the failure modes the pipeline's filters and repair stage
exist to fix.  The mock predictor "improves with training data" by mapping
the training-set size to a degradation severity through a quality curve; it
is deterministic given (seeds, training-set size), with fresh draws per
image whenever the training size changes.
"""

from __future__ import annotations

import hashlib
from dataclasses import dataclass, replace

import numpy as np

from .filters import FilterConfig, scaled_config, y_shaped_tree_filter
from .mask import as_mask, connected_components, row_runs, storage_row
from .template import YTreeParams, build_curves, curve_row_domains, rasterize

__all__ = [
    "DegradationConfig",
    "MockPredictorState",
    "generate_tree_params",
    "generate_ground_truth",
    "degrade",
    "severity_for",
    "derive_image_seed",
    "mock_predict",
]


@dataclass(frozen=True)
class DegradationConfig:
    """Knobs for turning a clean truth mask into a noisy prediction.

    Counts are Poisson means, probabilities are per-image; with every knob
    at zero the degradation is the identity.
    """

    gap_count: float = 0.0
    gap_length: tuple[int, int] = (3, 10)
    noise_blob_count: float = 0.0
    noise_blob_side: tuple[int, int] = (2, 6)
    pole_prob: float = 0.0
    neighbor_fragment_prob: float = 0.0
    thickness_jitter_sigma: float = 0.0
    rng_seed: int = 0

    def validate(self) -> None:
        for name in ("gap_count", "noise_blob_count", "thickness_jitter_sigma"):
            if getattr(self, name) < 0:
                raise ValueError(f"{name} must be non-negative")
        for name in ("pole_prob", "neighbor_fragment_prob"):
            if not 0.0 <= getattr(self, name) <= 1.0:
                raise ValueError(f"{name} must be in [0, 1]")

    def scaled(self, severity: float, rng_seed: int | None = None) -> "DegradationConfig":
        """Scale all knobs by a severity in [0, 1]; 0 means identity."""
        s = float(np.clip(severity, 0.0, 1.0))
        return replace(
            self,
            gap_count=self.gap_count * s,
            noise_blob_count=self.noise_blob_count * s,
            pole_prob=self.pole_prob * s,
            neighbor_fragment_prob=self.neighbor_fragment_prob * s,
            thickness_jitter_sigma=self.thickness_jitter_sigma * s,
            rng_seed=self.rng_seed if rng_seed is None else rng_seed,
        )


# Default degradation at severity 1, tuned for 96x96 benchmark masks.
DEFAULT_DEGRADATION = DegradationConfig(
    gap_count=2.5,
    gap_length=(3, 10),
    noise_blob_count=3.0,
    noise_blob_side=(2, 6),
    pole_prob=0.6,
    neighbor_fragment_prob=0.5,
    thickness_jitter_sigma=0.8,
)


@dataclass(frozen=True)
class MockPredictorState:
    """Mock model behavior: a quality curve plus base degradation.

    ``quality_curve`` maps training-set size to severity by linear
    interpolation (clamped at the ends) and must be non-increasing.
    """

    quality_curve: tuple[tuple[float, float], ...]
    rng_seed: int
    degradation: DegradationConfig = DEFAULT_DEGRADATION

    def validate(self) -> None:
        if len(self.quality_curve) < 1:
            raise ValueError("quality_curve needs at least one point")
        sizes = [p[0] for p in self.quality_curve]
        sevs = [p[1] for p in self.quality_curve]
        if sorted(sizes) != sizes:
            raise ValueError("quality_curve sizes must be ascending")
        if any(later > earlier for earlier, later in zip(sevs, sevs[1:])):
            raise ValueError("quality_curve severity must be non-increasing in size")
        if any(not 0.0 <= s <= 1.0 for s in sevs):
            raise ValueError("severities must be in [0, 1]")
        self.degradation.validate()


def severity_for(quality_curve: tuple[tuple[float, float], ...], training_size: int) -> float:
    xs = np.array([p[0] for p in quality_curve], dtype=np.float64)
    ys = np.array([p[1] for p in quality_curve], dtype=np.float64)
    return float(np.interp(float(training_size), xs, ys))


def derive_image_seed(rng_seed: int, image_key: str, training_size: int) -> int:
    """Stable per-(image, training size) seed, identical across machines."""
    digest = hashlib.sha256(f"{rng_seed}:{image_key}:{training_size}".encode()).digest()
    return int.from_bytes(digest[:8], "big")


def generate_tree_params(
    rng: np.random.Generator, height: int, width: int
) -> YTreeParams:
    """A plausible Y tree: moderate gradients, well separated branch tips."""
    h, w = float(height), float(width)
    t_px = rng.uniform(0.45 * w, 0.55 * w)
    t_pv = rng.uniform(-0.25, 0.25)
    c_p0y = rng.uniform(0.28 * h, 0.42 * h)
    c_p0x = float(np.clip(t_px + t_pv * c_p0y * rng.uniform(0.3, 0.7), 0.3 * w, 0.7 * w))
    b1_p2x = rng.uniform(0.06 * w, 0.30 * w)
    b2_p2x = rng.uniform(0.70 * w, 0.94 * w)

    def branch(p2x: float) -> tuple[float, float, float, float]:
        p1y = rng.uniform(0.55 * h, 0.80 * h)
        frac = (p1y - c_p0y) / (h - c_p0y)
        p1x = float(
            np.clip(c_p0x + frac * (p2x - c_p0x) + rng.uniform(-0.04, 0.04) * w, 1.0, w - 2.0)
        )
        v0 = float(np.clip((p1x - c_p0x) / (p1y - c_p0y) + rng.uniform(-0.2, 0.2), -2.0, 2.0))
        vf = float(np.clip((p2x - p1x) / (h - p1y) + rng.uniform(-0.2, 0.2), -2.0, 2.0))
        return v0, p1x, p1y, vf

    b1_v, b1_p1x, b1_p1y, b1_vf = branch(b1_p2x)
    b2_v, b2_p1x, b2_p1y, b2_vf = branch(b2_p2x)
    return YTreeParams(
        t_px=t_px,
        t_pv=t_pv,
        c_p0x=c_p0x,
        c_p0y=c_p0y,
        b1_v=b1_v,
        b1_p1x=b1_p1x,
        b1_p1y=b1_p1y,
        b1_p2x=b1_p2x,
        b1_vf=b1_vf,
        b2_v=b2_v,
        b2_p1x=b2_p1x,
        b2_p1y=b2_p1y,
        b2_p2x=b2_p2x,
        b2_vf=b2_vf,
    )


def _thickness_profile(
    rng: np.random.Generator, rows: np.ndarray, base: float, tip: float
) -> np.ndarray:
    """Smooth per-row thickness: linear taper plus a gentle sinusoid, 3..12 px."""
    if len(rows) == 0:
        return np.zeros(0, dtype=np.int64)
    frac = (rows - rows[0]) / max(1, rows[-1] - rows[0])
    amp = rng.uniform(0.0, 1.2)
    phase = rng.uniform(0.0, 2.0 * np.pi)
    cycles = rng.uniform(0.5, 2.0)
    t = base + (tip - base) * frac + amp * np.sin(phase + 2.0 * np.pi * cycles * frac)
    return np.clip(np.round(t), 3, 12).astype(np.int64)


def _rasterize_tree(
    rng: np.random.Generator, params: YTreeParams, height: int, width: int
) -> np.ndarray:
    curves = build_curves(params, height)
    domains = curve_row_domains(curves)
    tmap: dict[tuple[str, int], int] = {}
    trunk_base = rng.uniform(6.0, 10.0)
    for cid, rows in domains.items():
        if cid == "trunk":
            thick = _thickness_profile(rng, rows, trunk_base, trunk_base * 0.8)
        else:
            thick = _thickness_profile(rng, rows, rng.uniform(4.0, 7.0), rng.uniform(3.0, 4.5))
        for y, t in zip(rows, thick):
            tmap[(cid, int(y))] = int(t)
    return rasterize(curves, tmap, (height, width))


def generate_ground_truth(
    n: int,
    seed: int,
    size: tuple[int, int],
    filter_cfg: FilterConfig | None = None,
    max_attempts: int = 80,
) -> list[tuple[np.ndarray, YTreeParams]]:
    """Sample n ground-truth (mask, params) pairs for the given image size.

    Every mask is guaranteed to be one connected blob passing the Y filter
    (under ``filter_cfg``, or the size-scaled default); candidates violating
    that are resampled, deterministically in the seed.
    """
    if n < 1:
        raise ValueError("n must be >= 1")
    h, w = size
    cfg = filter_cfg or scaled_config(h, w)
    out: list[tuple[np.ndarray, YTreeParams]] = []
    for i in range(n):
        rng = np.random.default_rng(np.random.SeedSequence(entropy=[seed, i]))
        for attempt in range(max_attempts):
            params = generate_tree_params(rng, h, w)
            mask = _rasterize_tree(rng, params, h, w)
            if len(connected_components(mask)) != 1:
                continue
            if not y_shaped_tree_filter(mask, cfg).passes:
                continue
            out.append((mask, params))
            break
        else:
            raise RuntimeError(
                f"could not generate a valid tree for sample {i} in {max_attempts} attempts"
            )
    return out


def _estimate_trunk_x(mask: np.ndarray) -> int | None:
    h = mask.shape[0]
    band = mask[h - max(1, round(h * 0.15)) :, :]
    cols = np.nonzero(band)[1]
    if cols.size == 0:
        return None
    return int(np.floor(cols.mean()))


def degrade(truth: np.ndarray, cfg: DegradationConfig) -> np.ndarray:
    """Derive a prediction-like mask: jitter, cut gaps, then add artifacts.

    Output dimensions always match the input; with all knobs zero the input
    is returned unchanged.
    """
    cfg.validate()
    m = as_mask(truth)
    h, w = m.shape
    rng = np.random.default_rng(cfg.rng_seed)
    out = np.zeros_like(m)

    # per-run thickness jitter, recentered like the template rasterizer
    for run in row_runs(m):
        t = run.thickness
        if cfg.thickness_jitter_sigma > 0:
            t = max(1, int(round(t + rng.normal(0.0, cfg.thickness_jitter_sigma))))
        start = int(np.floor(run.center - (t - 1) / 2.0))
        r = storage_row(run.y, h)
        out[r, max(0, start) : min(w - 1, start + t - 1) + 1] = True

    # limb gaps: remove one run per row over a contiguous row interval,
    # chaining to the nearest run so a single limb is cut coherently
    n_gaps = int(rng.poisson(cfg.gap_count)) if cfg.gap_count > 0 else 0
    for _ in range(n_gaps):
        y0 = int(rng.integers(round(0.08 * h), round(0.95 * h)))
        length = int(rng.integers(cfg.gap_length[0], cfg.gap_length[1] + 1))
        prev_center: float | None = None
        for y in range(y0, min(y0 + length, h)):
            r = storage_row(y, h)
            row = out[r]
            starts = np.flatnonzero(np.diff(np.concatenate([[0], row.view(np.int8), [0]])) == 1)
            ends = np.flatnonzero(np.diff(np.concatenate([[0], row.view(np.int8), [0]])) == -1) - 1
            if starts.size == 0:
                continue
            centers = (starts + ends) / 2.0
            if prev_center is None:
                k = int(rng.integers(0, starts.size))
            else:
                k = int(np.abs(centers - prev_center).argmin())
            out[r, starts[k] : ends[k] + 1] = False
            prev_center = float(centers[k])

    # noise specks
    n_noise = int(rng.poisson(cfg.noise_blob_count)) if cfg.noise_blob_count > 0 else 0
    for _ in range(n_noise):
        bw = int(rng.integers(cfg.noise_blob_side[0], cfg.noise_blob_side[1] + 1))
        bh = int(rng.integers(cfg.noise_blob_side[0], cfg.noise_blob_side[1] + 1))
        r0 = int(rng.integers(0, max(1, h - bh)))
        c0 = int(rng.integers(0, max(1, w - bw)))
        out[r0 : r0 + bh, c0 : c0 + bw] = True

    # a pole: tall, thin, rooted at the bottom, offset from the trunk
    if cfg.pole_prob > 0 and rng.random() < cfg.pole_prob:
        t_pos = _estimate_trunk_x(out)
        if t_pos is not None:
            sign = -1 if rng.random() < 0.5 else 1
            offset = int(rng.integers(round(0.14 * w), round(0.30 * w)))
            px = int(np.clip(t_pos + sign * offset, 1, w - 4))
            pw = int(rng.integers(2, 5))
            ph = int(rng.integers(round(0.35 * h), round(0.80 * h)))
            out[h - ph :, px : px + pw] = True

    # a neighbor-tree fragment hugging the left or right edge
    if cfg.neighbor_fragment_prob > 0 and rng.random() < cfg.neighbor_fragment_prob:
        fw = int(rng.integers(3, 6))
        fh = int(rng.integers(round(0.25 * h), round(0.50 * h)))
        r0 = int(rng.integers(round(0.2 * h), round(0.5 * h)))
        c0 = 0 if rng.random() < 0.5 else w - fw
        out[r0 : r0 + fh, c0 : c0 + fw] = True

    return out


def mock_predict(
    truth: np.ndarray, image_key: str, training_size: int, state: MockPredictorState
) -> np.ndarray:
    """The mock model's prediction for one image at a given training size."""
    severity = severity_for(state.quality_curve, training_size)
    seed = derive_image_seed(state.rng_seed, image_key, training_size)
    return degrade(truth, state.degradation.scaled(severity, rng_seed=seed))
