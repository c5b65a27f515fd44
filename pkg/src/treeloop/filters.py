"""Heuristic blob filters: the four pre-filters and the Y-shaped tree filter.

All thresholds live in :class:`FilterConfig`.  The defaults assume 256x256
masks; they are plain pixel values and are *not* rescaled automatically for
other image sizes — use :func:`scaled_config` to derive an explicit config
for a different resolution.

Comparison strictness follows the threshold definitions exactly: blob areas
below ``min_blob_area`` are removed (strict), the trunk/tree tolerances are
inclusive (a centroid at exactly ±tol survives), and the false-branch /
false-trunk height and width cuts are strict.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, replace

import numpy as np
from scipy import ndimage

from .mask import EIGHT_CONNECTED, as_mask, empty_mask, label_blobs

__all__ = [
    "FilterConfig",
    "TrunkEstimate",
    "PreFilterResult",
    "YFilterResult",
    "scaled_config",
    "estimate_trunk_position",
    "small_blob_removal",
    "different_tree_detection",
    "false_branch_detection",
    "false_trunk_detection",
    "atl_pre_filter",
    "y_shaped_tree_filter",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class FilterConfig:
    """Pixel thresholds for the blob filters (defaults are for 256x256)."""

    min_blob_area: int = 50
    trunk_scan_rows: int = 40
    other_tree_tol: int = 100
    false_branch_y_min: int = 240
    false_branch_min_height: int = 5
    false_trunk_x_tol: int = 30
    false_trunk_min_height: int = 80
    false_trunk_max_width: int = 15
    y_filter_top_rows: int = 20
    y_filter_bottom_rows: int = 40
    y_filter_top_sections: int = 2
    y_filter_bottom_sections: int = 1

    def validate(self, height: int | None = None) -> None:
        for name in (
            "min_blob_area",
            "trunk_scan_rows",
            "other_tree_tol",
            "false_branch_y_min",
            "false_branch_min_height",
            "false_trunk_x_tol",
            "false_trunk_min_height",
            "false_trunk_max_width",
            "y_filter_top_rows",
            "y_filter_bottom_rows",
            "y_filter_top_sections",
            "y_filter_bottom_sections",
        ):
            if getattr(self, name) <= 0:
                raise ValueError(f"FilterConfig.{name} must be positive")
        if height is not None and self.false_branch_y_min >= height:
            raise ValueError(
                f"false_branch_y_min={self.false_branch_y_min} must be below image height {height}"
            )


def scaled_config(height: int, width: int, base: FilterConfig | None = None) -> FilterConfig:
    """Rescale a 256-based config to another resolution.

    Lengths scale linearly with the matching image dimension, areas
    quadratically; every threshold stays at least 1.  This is a convenience
    for building explicit configs — the filters themselves never rescale.
    """
    base = base or FilterConfig()
    sy = height / 256.0
    sx = width / 256.0

    def ln(v: float, s: float) -> int:
        return max(1, round(v * s))

    return replace(
        base,
        min_blob_area=max(1, round(base.min_blob_area * sy * sx)),
        trunk_scan_rows=ln(base.trunk_scan_rows, sy),
        other_tree_tol=ln(base.other_tree_tol, sx),
        false_branch_y_min=ln(base.false_branch_y_min, sy),
        false_branch_min_height=ln(base.false_branch_min_height, sy),
        false_trunk_x_tol=ln(base.false_trunk_x_tol, sx),
        false_trunk_min_height=ln(base.false_trunk_min_height, sy),
        false_trunk_max_width=ln(base.false_trunk_max_width, sx),
        y_filter_top_rows=ln(base.y_filter_top_rows, sy),
        y_filter_bottom_rows=ln(base.y_filter_bottom_rows, sy),
    )


@dataclass(frozen=True)
class TrunkEstimate:
    """Estimated trunk center x (t_pos), found by scanning the bottom rows."""

    t_pos: int
    found: bool

    @staticmethod
    def not_found() -> "TrunkEstimate":
        return TrunkEstimate(t_pos=0, found=False)


@dataclass(frozen=True)
class PreFilterResult:
    mask: np.ndarray
    trunk: TrunkEstimate
    warnings: tuple[str, ...]


@dataclass(frozen=True)
class YFilterResult:
    passes: bool
    mask: np.ndarray


def estimate_trunk_position(mask: np.ndarray, cfg: FilterConfig) -> TrunkEstimate:
    """Pixel-weighted mean x of foreground in the bottom ``trunk_scan_rows`` rows.

    The mean is truncated to an integer column.  ``found`` is False when the
    scanned region holds no foreground.
    """
    m = as_mask(mask)
    h = m.shape[0]
    band = m[max(0, h - cfg.trunk_scan_rows) :, :]
    cols = np.nonzero(band)[1]
    if cols.size == 0:
        return TrunkEstimate.not_found()
    return TrunkEstimate(t_pos=int(np.floor(cols.mean())), found=True)


def _remove_labels(mask: np.ndarray, labels: np.ndarray, drop: set[int]) -> np.ndarray:
    if not drop:
        return as_mask(mask).copy()
    keep = as_mask(mask).copy()
    keep[np.isin(labels, list(drop))] = False
    return keep


def small_blob_removal(mask: np.ndarray, cfg: FilterConfig) -> np.ndarray:
    """Drop blobs with fewer than ``min_blob_area`` pixels."""
    labels, blobs = label_blobs(mask)
    drop = {b.label for b in blobs if b.pixel_count < cfg.min_blob_area}
    return _remove_labels(mask, labels, drop)


def different_tree_detection(
    mask: np.ndarray, trunk: TrunkEstimate, cfg: FilterConfig
) -> np.ndarray:
    """Drop blobs whose centroid x lies outside t_pos ± ``other_tree_tol``.

    No-op (with a log warning) when the trunk was not found.
    """
    if not trunk.found:
        log.warning("different_tree_detection skipped: trunk position not found")
        return as_mask(mask).copy()
    labels, blobs = label_blobs(mask)
    drop = {b.label for b in blobs if abs(b.centroid_x - trunk.t_pos) > cfg.other_tree_tol}
    return _remove_labels(mask, labels, drop)


def false_branch_detection(mask: np.ndarray, cfg: FilterConfig) -> np.ndarray:
    """Drop blobs near the top of the image that are tall enough to be stray ends.

    A blob goes iff centroid y > ``false_branch_y_min`` and bbox height >
    ``false_branch_min_height``.
    """
    labels, blobs = label_blobs(mask)
    drop = {
        b.label
        for b in blobs
        if b.centroid_y > cfg.false_branch_y_min and b.height > cfg.false_branch_min_height
    }
    return _remove_labels(mask, labels, drop)


def false_trunk_detection(
    mask: np.ndarray, trunk: TrunkEstimate, cfg: FilterConfig
) -> np.ndarray:
    """Drop tall, thin, off-trunk blobs (wooden poles, neighboring trunks).

    A blob goes iff its centroid x is outside t_pos ± ``false_trunk_x_tol``
    and bbox height > ``false_trunk_min_height`` and bbox width <
    ``false_trunk_max_width``.  No-op when the trunk was not found.
    """
    if not trunk.found:
        log.warning("false_trunk_detection skipped: trunk position not found")
        return as_mask(mask).copy()
    labels, blobs = label_blobs(mask)
    drop = {
        b.label
        for b in blobs
        if abs(b.centroid_x - trunk.t_pos) > cfg.false_trunk_x_tol
        and b.height > cfg.false_trunk_min_height
        and b.width < cfg.false_trunk_max_width
    }
    return _remove_labels(mask, labels, drop)


def atl_pre_filter(mask: np.ndarray, cfg: FilterConfig) -> PreFilterResult:
    """The full pre-filter chain producing the "filtered prediction".

    Order: small-blob removal, trunk estimation, different-tree detection,
    false-branch detection, false-trunk detection.  Never fails; filters that
    need the trunk degrade to no-ops with a recorded warning.
    """
    warnings: list[str] = []
    m = small_blob_removal(mask, cfg)
    trunk = estimate_trunk_position(m, cfg)
    if not trunk.found:
        warnings.append("trunk position not found; tree/trunk filters skipped")
    m = different_tree_detection(m, trunk, cfg)
    m = false_branch_detection(m, cfg)
    m = false_trunk_detection(m, trunk, cfg)
    return PreFilterResult(mask=m, trunk=trunk, warnings=tuple(warnings))


def _band_section_count(blob_mask: np.ndarray, rows: slice) -> int:
    band = blob_mask[rows, :]
    if not band.any():
        return 0
    _, n = ndimage.label(band, structure=EIGHT_CONNECTED)
    return n


def y_shaped_tree_filter(mask: np.ndarray, cfg: FilterConfig) -> YFilterResult:
    """Keep the largest blob that looks like a complete Y tree.

    A blob qualifies iff its intersection with the top band
    (``y_filter_top_rows`` rows) has at least ``y_filter_top_sections``
    8-connected sections and its intersection with the bottom band has at
    least ``y_filter_bottom_sections``.  "Largest" ranges over qualifying
    blobs only.  Fails (empty mask) when nothing qualifies.
    """
    m = as_mask(mask)
    h = m.shape[0]
    labels, blobs = label_blobs(m)
    top = slice(0, min(cfg.y_filter_top_rows, h))
    bottom = slice(max(0, h - cfg.y_filter_bottom_rows), h)
    qualifying = []
    for b in blobs:
        blob_mask = labels == b.label
        if _band_section_count(blob_mask, top) < cfg.y_filter_top_sections:
            continue
        if _band_section_count(blob_mask, bottom) < cfg.y_filter_bottom_sections:
            continue
        qualifying.append(b)
    if not qualifying:
        return YFilterResult(passes=False, mask=empty_mask(*m.shape))
    best = max(qualifying, key=lambda b: (b.pixel_count, -b.label))
    return YFilterResult(passes=True, mask=labels == best.label)
