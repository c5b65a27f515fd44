"""Dataset bookkeeping for the iterative loop.

The manifest records every image's status across iterations: seed (manually
labeled), unlabeled, pending (drawn into the current batch), pseudo-labeled
(accepted by the custom process), or rejected (failed this iteration;
returned to the unlabeled pool afterwards).  It persists as versioned JSON,
written atomically (new file, then rename), with all paths relative to the
declared workspace root.
"""

from __future__ import annotations

import json
import os
from dataclasses import dataclass, field
from pathlib import Path

__all__ = [
    "SEED",
    "UNLABELED",
    "PENDING",
    "PSEUDO_LABELED",
    "REJECTED",
    "STATUSES",
    "ManifestEntry",
    "DatasetManifest",
    "dump_json",
]

SEED = "seed"
UNLABELED = "unlabeled"
PENDING = "pending"
PSEUDO_LABELED = "pseudo_labeled"
REJECTED = "rejected"
STATUSES = (SEED, UNLABELED, PENDING, PSEUDO_LABELED, REJECTED)

SCHEMA_VERSION = 1


def dump_json(data, path: str | Path) -> None:
    """Canonical JSON write: sorted keys, atomic replace."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    tmp.write_text(json.dumps(data, indent=2, sort_keys=True) + "\n")
    os.replace(tmp, path)


@dataclass
class ManifestEntry:
    image_id: str
    image_path: str
    label_path: str | None = None
    status: str = UNLABELED
    accepted_at_iteration: int | None = None
    last_predicted_at_iteration: int | None = None

    def to_json_dict(self) -> dict:
        return {
            "image_id": self.image_id,
            "image_path": self.image_path,
            "label_path": self.label_path,
            "status": self.status,
            "accepted_at_iteration": self.accepted_at_iteration,
            "last_predicted_at_iteration": self.last_predicted_at_iteration,
        }

    @staticmethod
    def from_json_dict(d: dict) -> "ManifestEntry":
        return ManifestEntry(
            image_id=d["image_id"],
            image_path=d["image_path"],
            label_path=d.get("label_path"),
            status=d["status"],
            accepted_at_iteration=d.get("accepted_at_iteration"),
            last_predicted_at_iteration=d.get("last_predicted_at_iteration"),
        )


@dataclass
class DatasetManifest:
    mode: str
    entries: list[ManifestEntry]
    iteration: int = 0
    draw_order: list[str] = field(default_factory=list)

    def validate(self) -> None:
        seen: set[str] = set()
        for e in self.entries:
            if e.image_id in seen:
                raise ValueError(f"duplicate image id {e.image_id!r}")
            seen.add(e.image_id)
            if e.status not in STATUSES:
                raise ValueError(f"{e.image_id}: unknown status {e.status!r}")
            if e.status == SEED and not e.label_path:
                raise ValueError(f"{e.image_id}: seed entries must carry a label")
            if e.status == PSEUDO_LABELED and (
                not e.label_path or e.accepted_at_iteration is None
            ):
                raise ValueError(
                    f"{e.image_id}: pseudo-labeled entries need a label and an iteration"
                )
        unknown = set(self.draw_order) - seen
        if unknown:
            raise ValueError(f"draw_order references unknown ids: {sorted(unknown)}")

    def find(self, image_id: str) -> ManifestEntry:
        for e in self.entries:
            if e.image_id == image_id:
                return e
        raise KeyError(image_id)

    def with_status(self, *statuses: str) -> list[ManifestEntry]:
        return [e for e in self.entries if e.status in statuses]

    def counts(self) -> dict[str, int]:
        out = {s: 0 for s in STATUSES}
        for e in self.entries:
            out[e.status] += 1
        return out

    def unlabeled_pool_size(self) -> int:
        # pending entries are drawn but not yet resolved, so still "unlabeled"
        c = self.counts()
        return c[UNLABELED] + c[PENDING]

    def to_json_dict(self) -> dict:
        return {
            "schema_version": SCHEMA_VERSION,
            "mode": self.mode,
            "iteration": self.iteration,
            "draw_order": list(self.draw_order),
            "entries": [e.to_json_dict() for e in self.entries],
        }

    @staticmethod
    def from_json_dict(d: dict) -> "DatasetManifest":
        version = d.get("schema_version")
        if version != SCHEMA_VERSION:
            raise ValueError(f"unsupported manifest schema version {version!r}")
        m = DatasetManifest(
            mode=d["mode"],
            iteration=int(d["iteration"]),
            draw_order=list(d.get("draw_order", [])),
            entries=[ManifestEntry.from_json_dict(e) for e in d["entries"]],
        )
        m.validate()
        return m

    def save(self, path: str | Path) -> None:
        self.validate()
        dump_json(self.to_json_dict(), path)

    @staticmethod
    def load(path: str | Path) -> "DatasetManifest":
        return DatasetManifest.from_json_dict(json.loads(Path(path).read_text()))
