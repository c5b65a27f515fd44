"""Binary mask primitives: connected components, row/column runs, skeletons.

Masks are 2D numpy bool arrays of shape ``(height, width)``, stored in the
usual image order (row 0 at the top).  All geometry reported by this package
uses *tree coordinates*: x is the column (0 at the left) and y counts rows
upward from the bottom of the image, so the trunk base sits near y=0 and the
canopy near y=height-1.  ``tree_y``/``storage_row`` convert between the two
conventions.

Connected components use 8-connectivity throughout: thin diagonal branch
segments must stay a single blob, which 4-connectivity would fragment.
"""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np
from PIL import Image
from scipy import ndimage

__all__ = [
    "MaskError",
    "Blob",
    "RowRun",
    "PartialSkeleton",
    "as_mask",
    "empty_mask",
    "tree_y",
    "storage_row",
    "rotate90",
    "label_blobs",
    "connected_components",
    "row_runs",
    "column_runs",
    "runs_by_row",
    "paint_runs",
    "to_partial_skeleton",
    "keep_largest_blob",
    "load_mask",
    "save_mask",
]

EIGHT_CONNECTED = np.ones((3, 3), dtype=bool)


class MaskError(ValueError):
    """Raised for malformed masks or mismatched mask dimensions."""


def as_mask(arr: np.ndarray) -> np.ndarray:
    """Validate and coerce ``arr`` to a 2D bool mask.

    Accepts bool arrays, or integer arrays whose values are drawn from
    {0, 1} or {0, 255}; anything else is ambiguous and rejected.
    """
    a = np.asarray(arr)
    if a.ndim != 2:
        raise MaskError(f"mask must be 2D, got shape {a.shape}")
    if a.shape[0] < 1 or a.shape[1] < 1:
        raise MaskError(f"mask must be at least 1x1, got shape {a.shape}")
    if a.dtype == bool:
        return a
    if np.issubdtype(a.dtype, np.integer):
        vals = np.unique(a)
        if np.isin(vals, (0, 1)).all() or np.isin(vals, (0, 255)).all():
            return a > 0
    raise MaskError(f"mask values must be binary, got dtype {a.dtype}")


def empty_mask(height: int, width: int) -> np.ndarray:
    return np.zeros((height, width), dtype=bool)


def tree_y(row: int, height: int) -> int:
    """Storage row -> tree y (0 at the bottom row)."""
    return (height - 1) - row


def storage_row(y: int, height: int) -> int:
    """Tree y -> storage row.  Inverse of :func:`tree_y`."""
    return (height - 1) - y


def rotate90(mask: np.ndarray) -> np.ndarray:
    """Rotate a mask 90 degrees counterclockwise (the column-scan convention)."""
    return np.ascontiguousarray(np.rot90(as_mask(mask)))


@dataclass(frozen=True)
class Blob:
    """An 8-connected component of foreground pixels.

    All coordinates are tree coordinates; the bbox is inclusive on both ends.
    """

    label: int
    pixel_count: int
    x_min: int
    x_max: int
    y_min: int
    y_max: int
    centroid_x: float
    centroid_y: float

    @property
    def width(self) -> int:
        return self.x_max - self.x_min + 1

    @property
    def height(self) -> int:
        return self.y_max - self.y_min + 1


@dataclass(frozen=True)
class RowRun:
    """A maximal horizontal run of foreground pixels in one row.

    ``y`` is the tree row; ``x_start``/``x_end`` are inclusive columns.
    """

    y: int
    x_start: int
    x_end: int

    @property
    def center(self) -> float:
        return (self.x_start + self.x_end) / 2.0

    @property
    def thickness(self) -> int:
        return self.x_end - self.x_start + 1

    def contains(self, x: float) -> bool:
        return self.x_start <= x <= self.x_end


@dataclass(frozen=True)
class PartialSkeleton:
    """Per-run centers of a mask: one (y, center x) point per RowRun.

    The GA fits the tree template to these points.  ``ys`` and ``centers``
    are parallel arrays ordered like :func:`row_runs`.
    """

    ys: np.ndarray
    centers: np.ndarray

    def __len__(self) -> int:
        return len(self.ys)

    @property
    def is_empty(self) -> bool:
        return len(self.ys) == 0


def label_blobs(mask: np.ndarray) -> tuple[np.ndarray, list[Blob]]:
    """Label 8-connected components and summarize each as a :class:`Blob`.

    Returns ``(labels, blobs)`` where ``labels`` is an int array (0 =
    background) and labels are renumbered in raster-scan discovery order
    (top row first, left to right), so label 1 is the component whose
    first pixel comes earliest in storage order.
    """
    m = as_mask(mask)
    h = m.shape[0]
    raw, n = ndimage.label(m, structure=EIGHT_CONNECTED)
    if n == 0:
        return raw, []
    # Renumber by first occurrence in raster order; scipy does not guarantee it.
    flat = raw.ravel()
    first = np.full(n + 1, flat.size, dtype=np.int64)
    idx = np.flatnonzero(flat)
    # reversed so earlier indices overwrite later ones
    first[flat[idx[::-1]]] = idx[::-1]
    order = np.argsort(first[1:], kind="stable") + 1
    remap = np.zeros(n + 1, dtype=raw.dtype)
    remap[order] = np.arange(1, n + 1)
    labels = remap[raw]

    blobs = []
    rows, cols = np.nonzero(labels)
    ys = tree_y(rows, h)
    lab = labels[rows, cols]
    for k in range(1, n + 1):
        sel = lab == k
        xs = cols[sel]
        yk = ys[sel]
        blobs.append(
            Blob(
                label=k,
                pixel_count=int(sel.sum()),
                x_min=int(xs.min()),
                x_max=int(xs.max()),
                y_min=int(yk.min()),
                y_max=int(yk.max()),
                centroid_x=float(xs.mean()),
                centroid_y=float(yk.mean()),
            )
        )
    return labels, blobs


def connected_components(mask: np.ndarray) -> list[Blob]:
    """All 8-connected foreground components, in raster-scan discovery order."""
    return label_blobs(mask)[1]


def row_runs(mask: np.ndarray) -> list[RowRun]:
    """All maximal horizontal runs, ordered by (y descending, x_start ascending)."""
    m = as_mask(mask)
    h, w = m.shape
    out: list[RowRun] = []
    padded = np.zeros((h, w + 2), dtype=np.int8)
    padded[:, 1:-1] = m
    diff = np.diff(padded, axis=1)
    for r in range(h):
        starts = np.flatnonzero(diff[r] == 1)
        if starts.size == 0:
            continue
        ends = np.flatnonzero(diff[r] == -1) - 1
        y = tree_y(r, h)
        out.extend(RowRun(y, int(s), int(e)) for s, e in zip(starts, ends))
    return out


def column_runs(mask: np.ndarray) -> list[RowRun]:
    """Maximal vertical runs, reported in the rotated-image frame.

    Equals ``row_runs(rotate90(mask))`` exactly: the run's ``y`` is the
    original column index and ``x_start``/``x_end`` span original storage
    rows (0 at the top).  Columns are scanned right to left.
    """
    m = as_mask(mask)
    h, w = m.shape
    out: list[RowRun] = []
    padded = np.zeros((h + 2, w), dtype=np.int8)
    padded[1:-1, :] = m
    diff = np.diff(padded, axis=0)
    for c in range(w - 1, -1, -1):
        starts = np.flatnonzero(diff[:, c] == 1)
        if starts.size == 0:
            continue
        ends = np.flatnonzero(diff[:, c] == -1) - 1
        out.extend(RowRun(c, int(s), int(e)) for s, e in zip(starts, ends))
    return out


def runs_by_row(mask: np.ndarray) -> dict[int, list[RowRun]]:
    """Row runs grouped by tree row, each list ordered by x_start."""
    grouped: dict[int, list[RowRun]] = {}
    for run in row_runs(mask):
        grouped.setdefault(run.y, []).append(run)
    return grouped


def paint_runs(runs: list[RowRun], height: int, width: int) -> np.ndarray:
    """Rebuild a mask from row runs (clamping to bounds)."""
    m = empty_mask(height, width)
    for run in runs:
        if not 0 <= run.y < height:
            continue
        r = storage_row(run.y, height)
        m[r, max(0, run.x_start) : min(width - 1, run.x_end) + 1] = True
    return m


def to_partial_skeleton(mask: np.ndarray) -> PartialSkeleton:
    """One (y, center) point per row run; the GA's fitting target."""
    runs = row_runs(mask)
    ys = np.array([r.y for r in runs], dtype=np.int64)
    centers = np.array([r.center for r in runs], dtype=np.float64)
    return PartialSkeleton(ys=ys, centers=centers)


def keep_largest_blob(mask: np.ndarray) -> np.ndarray:
    """Keep only the largest blob; ties go to the earliest label in raster order.

    An empty mask is returned unchanged.
    """
    labels, blobs = label_blobs(mask)
    if not blobs:
        return as_mask(mask).copy()
    best = max(blobs, key=lambda b: (b.pixel_count, -b.label))
    return labels == best.label


def load_mask(path: str | Path) -> np.ndarray:
    """Load a mask from an 8-bit grayscale PNG; values > 127 are foreground."""
    with Image.open(path) as img:
        arr = np.asarray(img.convert("L"))
    return arr > 127


def save_mask(path: str | Path, mask: np.ndarray) -> None:
    """Save a mask as an 8-bit grayscale PNG (foreground 255, background 0)."""
    m = as_mask(mask)
    img = Image.fromarray(np.where(m, 255, 0).astype(np.uint8), mode="L")
    img.save(path, format="PNG")
