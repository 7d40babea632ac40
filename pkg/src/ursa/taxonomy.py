"""Class taxonomies, label-map remapping, and per-class IOU evaluation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from importlib import resources
from typing import IO, Mapping

import numpy as np

from .compositor import UNLABELED, LabelMap

IGNORE = "ignore"


class TaxonomyFormatError(ValueError):
    """A taxonomy or remap document is invalid."""


class UnmappedClassError(ValueError):
    """A label map contains a class id the remap table does not cover."""


@dataclass(frozen=True)
class ClassTaxonomy:
    """Ordered (id, name) class list with contiguous ids from 0 and unique names."""

    classes: tuple[tuple[int, str], ...]

    def __post_init__(self) -> None:
        ids = [c for c, _ in self.classes]
        names = [n for _, n in self.classes]
        if ids != list(range(len(ids))):
            raise TaxonomyFormatError(f"ids must be contiguous from 0, got {ids}")
        if len(set(names)) != len(names):
            dupes = sorted({n for n in names if names.count(n) > 1})
            raise TaxonomyFormatError(f"duplicate class names: {dupes}")

    def __len__(self) -> int:
        return len(self.classes)

    def ids(self) -> tuple[int, ...]:
        return tuple(c for c, _ in self.classes)

    def name_of(self, cid: int) -> str:
        return dict(self.classes)[cid]

    def id_of(self, name: str) -> int:
        return {n: c for c, n in self.classes}[name]


def load_taxonomy(source: bytes | str | IO) -> ClassTaxonomy:
    """Taxonomy CSV: id,name (header line optional)."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    rows: list[tuple[int, str]] = []
    seen_ids: set[int] = set()
    for lineno, line in enumerate(source.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if parts[0] == "id":
            continue
        if len(parts) != 2:
            raise TaxonomyFormatError(f"line {lineno}: expected id,name")
        try:
            cid = int(parts[0])
        except ValueError as exc:
            raise TaxonomyFormatError(f"line {lineno}: {exc}") from exc
        if cid in seen_ids:
            raise TaxonomyFormatError(f"line {lineno}: duplicate class id {cid}")
        seen_ids.add(cid)
        rows.append((cid, parts[1]))
    rows.sort()
    return ClassTaxonomy(tuple(rows))


def _read_data(name: str) -> str:
    return resources.files("ursa.data").joinpath(name).read_text(encoding="utf-8")


def ursa_taxonomy() -> ClassTaxonomy:
    """The shipped 37-class road-scene taxonomy."""
    return load_taxonomy(_read_data("ursa_taxonomy.csv"))


def cityscapes_eval_taxonomy() -> ClassTaxonomy:
    """The shipped 19-class evaluation taxonomy."""
    return load_taxonomy(_read_data("cityscapes_eval_taxonomy.csv"))


def default_remap() -> "RemapTable":
    """Shipped 37-class -> 19-class table. Artifact-defined: only a handful of
    correspondences are forced by the class names; the rest follow common
    evaluation conventions and are configurable via any remap CSV."""
    return load_remap(_read_data("default_remap.csv"))


def ursa_palette_csv() -> str:
    return _read_data("ursa_palette.csv")


def cityscapes_palette_csv() -> str:
    return _read_data("cityscapes_palette.csv")


@dataclass(frozen=True)
class RemapTable:
    """Source class id -> target class id, or None to drop the class."""

    mapping: Mapping[int, int | None]

    def target_of(self, cid: int) -> int | None:
        if cid not in self.mapping:
            raise UnmappedClassError(f"class id {cid} has no remap entry")
        return self.mapping[cid]


def load_remap(source: bytes | str | IO) -> RemapTable:
    """Remap CSV: src_id,dst_id|ignore (header line optional)."""
    if hasattr(source, "read"):
        source = source.read()
    if isinstance(source, bytes):
        source = source.decode("utf-8")
    mapping: dict[int, int | None] = {}
    for lineno, line in enumerate(source.splitlines(), start=1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        parts = [p.strip() for p in line.split(",")]
        if parts[0] == "src_id":
            continue
        if len(parts) != 2:
            raise TaxonomyFormatError(f"line {lineno}: expected src_id,dst_id|{IGNORE}")
        try:
            src = int(parts[0])
            dst = None if parts[1] == IGNORE else int(parts[1])
        except ValueError as exc:
            raise TaxonomyFormatError(f"line {lineno}: {exc}") from exc
        if src in mapping:
            raise TaxonomyFormatError(f"line {lineno}: duplicate source id {src}")
        mapping[src] = dst
    return RemapTable(mapping)


def remap_label_map(m: LabelMap, table: RemapTable) -> LabelMap:
    """Pointwise class substitution; dropped classes become unlabeled."""
    present = [int(c) for c in np.unique(m.grid) if int(c) != UNLABELED]
    lut = np.full(256, UNLABELED, dtype=np.uint8)
    for cid in present:
        dst = table.target_of(cid)
        lut[cid] = UNLABELED if dst is None else dst
    return LabelMap(m.width, m.height, lut[m.grid])


@dataclass(frozen=True)
class IouReport:
    """Per-class intersection-over-union; classes absent from both maps are omitted."""

    per_class: dict[int, float]
    absent: tuple[int, ...]
    mean: float | None

    def to_json_obj(self, taxonomy: ClassTaxonomy | None = None) -> dict:
        def label(cid: int) -> str:
            return taxonomy.name_of(cid) if taxonomy is not None else str(cid)

        return {
            "per_class": {label(c): v for c, v in sorted(self.per_class.items())},
            "absent": [label(c) for c in self.absent],
            "mean": self.mean,
        }


def class_iou(
    pred: LabelMap,
    gt: LabelMap,
    taxonomy: ClassTaxonomy,
    absent_as_zero: bool = False,
) -> IouReport:
    """Per class: TP / (TP + FP + FN), with unlabeled ground truth excluded entirely.

    Classes appearing in neither map are left out of the mean unless
    absent_as_zero is set, in which case they contribute 0.
    """
    if (pred.width, pred.height) != (gt.width, gt.height):
        raise ValueError(
            f"dimension mismatch {pred.width}x{pred.height} vs {gt.width}x{gt.height}"
        )
    valid = gt.grid != UNLABELED
    p = pred.grid[valid]
    t = gt.grid[valid]
    known = set(taxonomy.ids())
    observed = {int(c) for c in np.unique(p) if int(c) != UNLABELED}
    observed |= {int(c) for c in np.unique(t)}
    alien = observed - known
    if alien:
        raise ValueError(f"class ids outside the taxonomy: {sorted(alien)}")
    per_class: dict[int, float] = {}
    absent: list[int] = []
    for cid in taxonomy.ids():
        in_p = p == cid
        in_t = t == cid
        tp = int(np.count_nonzero(in_p & in_t))
        fp = int(np.count_nonzero(in_p & ~in_t))
        fn = int(np.count_nonzero(~in_p & in_t))
        denom = tp + fp + fn
        if denom == 0:
            absent.append(cid)
        else:
            per_class[cid] = tp / denom
    values = list(per_class.values())
    if absent_as_zero:
        values += [0.0] * len(absent)
    mean = sum(values) / len(values) if values else None
    return IouReport(per_class, tuple(absent), mean)


def dump_iou_report(report: IouReport, taxonomy: ClassTaxonomy | None = None) -> str:
    return json.dumps(report.to_json_obj(taxonomy), sort_keys=True, indent=2) + "\n"
