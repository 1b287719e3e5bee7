"""Domain types and the JSONL record manifest."""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, IoFailure, MalformedManifest, MissingAsset
from .pgm import read_pgm

LABELS = ("pos", "neg")
SPLITS = ("train", "test")
MANIFEST_FIELDS = (
    "id",
    "image",
    "saliency",
    "truth_box",
    "predicted_label",
    "true_label",
    "score",
    "class_tag",
    "split",
)


@dataclass(frozen=True)
class Box2D:
    """Axis-aligned rectangle in pixel coordinates, origin top-left.

    Pixel ``(i, j)`` covers ``[i, i+1) x [j, j+1)``, so a box tightly enclosing
    pixel columns ``a..b`` spans ``x0=a, x1=b+1``.
    """

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        coords = (self.x0, self.y0, self.x1, self.y1)
        if not all(math.isfinite(c) for c in coords):
            raise ValueError(f"non-finite box coordinates {coords}")
        if min(coords) < 0:
            raise ValueError(f"negative box coordinates {coords}")
        if not (self.x0 < self.x1 and self.y0 < self.y1):
            raise ValueError(f"box has no area: {coords}")

    @property
    def width(self) -> float:
        return self.x1 - self.x0

    @property
    def height(self) -> float:
        return self.y1 - self.y0

    @property
    def area(self) -> float:
        return self.width * self.height

    @property
    def center(self) -> tuple[float, float]:
        return ((self.x0 + self.x1) / 2, (self.y0 + self.y1) / 2)

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)

    def within(self, width: float, height: float) -> bool:
        return self.x1 <= width and self.y1 <= height

    def as_list(self) -> list[float]:
        return [self.x0, self.y0, self.x1, self.y1]


class GrayImage:
    """8-bit grayscale raster stored row-major as a ``(height, width)`` array."""

    def __init__(self, data):
        data = np.asarray(data)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D raster, got shape {data.shape}")
        if data.dtype != np.uint8:
            raise ValueError(f"expected uint8 intensities, got {data.dtype}")
        self.data = data.copy()
        self.data.setflags(write=False)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


class SaliencyMap:
    """Real-valued saliency in [0, 1], same layout as :class:`GrayImage`."""

    def __init__(self, data):
        data = np.asarray(data, dtype=np.float64)
        if data.ndim != 2 or data.shape[0] < 1 or data.shape[1] < 1:
            raise ValueError(f"expected a non-empty 2-D map, got shape {data.shape}")
        if not np.all(np.isfinite(data)) or data.min() < 0 or data.max() > 1:
            raise ValueError("saliency values must be finite and within [0, 1]")
        self.data = data.copy()
        self.data.setflags(write=False)

    @classmethod
    def from_uint8(cls, raw: np.ndarray) -> SaliencyMap:
        return cls(np.asarray(raw, dtype=np.float64) / 255.0)

    def to_uint8(self) -> np.ndarray:
        return np.rint(self.data * 255.0).astype(np.uint8)

    @property
    def width(self) -> int:
        return self.data.shape[1]

    @property
    def height(self) -> int:
        return self.data.shape[0]


@dataclass(frozen=True)
class PredictionRecord:
    """One classifier output.

    ``image`` and ``saliency`` are paths relative to the manifest directory.
    With two classes ``score`` is the positive-class probability.
    """

    id: str
    image: str
    saliency: str
    truth_box: Box2D | None
    predicted_label: str
    true_label: str
    score: float
    class_tag: str | None = None
    split: str = "train"

    def __post_init__(self):
        if self.predicted_label not in LABELS or self.true_label not in LABELS:
            raise ValueError(f"labels must be one of {LABELS}")
        if self.split not in SPLITS:
            raise ValueError(f"split must be one of {SPLITS}")
        if not (0.0 <= self.score <= 1.0):
            raise ValueError(f"score {self.score} outside [0, 1]")


def load_record_images(record: PredictionRecord, root) -> tuple[GrayImage, SaliencyMap]:
    """Read the image and saliency rasters of ``record`` relative to ``root``."""
    root = Path(root)
    rasters = []
    for rel in (record.image, record.saliency):
        try:
            rasters.append(read_pgm(root / rel))
        except (IoFailure, ValueError):
            raise MissingAsset(record.id, rel) from None
    image = GrayImage(rasters[0])
    saliency = SaliencyMap.from_uint8(rasters[1])
    if image.data.shape != saliency.data.shape:
        raise DimensionMismatch(
            f"record {record.id!r}: image {image.width}x{image.height} "
            f"vs saliency {saliency.width}x{saliency.height}"
        )
    return image, saliency


def record_to_json(record: PredictionRecord) -> str:
    obj = {
        "id": record.id,
        "image": record.image,
        "saliency": record.saliency,
        "truth_box": None if record.truth_box is None else record.truth_box.as_list(),
        "predicted_label": record.predicted_label,
        "true_label": record.true_label,
        "score": record.score,
        "class_tag": record.class_tag,
        "split": record.split,
    }
    return json.dumps(obj, ensure_ascii=False)


def _parse_line(text: str, lineno: int) -> PredictionRecord:
    try:
        obj = json.loads(text)
    except json.JSONDecodeError as exc:
        raise MalformedManifest(f"invalid JSON ({exc.msg})", lineno) from None
    if not isinstance(obj, dict):
        raise MalformedManifest("entry is not a JSON object", lineno)
    if set(obj) != set(MANIFEST_FIELDS):
        missing = sorted(set(MANIFEST_FIELDS) - set(obj))
        extra = sorted(set(obj) - set(MANIFEST_FIELDS))
        raise MalformedManifest(f"field mismatch (missing {missing}, unexpected {extra})", lineno)

    for key in ("id", "image", "saliency"):
        if not isinstance(obj[key], str) or not obj[key]:
            raise MalformedManifest(f"{key!r} must be a non-empty string", lineno)
    if obj["class_tag"] is not None and not isinstance(obj["class_tag"], str):
        raise MalformedManifest("'class_tag' must be a string or null", lineno)
    score = obj["score"]
    if isinstance(score, bool) or not isinstance(score, (int, float)):
        raise MalformedManifest("'score' must be a number", lineno)

    box = obj["truth_box"]
    if box is not None:
        if (
            not isinstance(box, list)
            or len(box) != 4
            or not all(isinstance(v, (int, float)) and not isinstance(v, bool) for v in box)
        ):
            raise MalformedManifest("'truth_box' must be [x0, y0, x1, y1] or null", lineno)
        try:
            box = Box2D(*(float(v) for v in box))
        except ValueError as exc:
            raise MalformedManifest(f"invalid truth_box: {exc}", lineno) from None

    try:
        return PredictionRecord(
            id=obj["id"],
            image=obj["image"],
            saliency=obj["saliency"],
            truth_box=box,
            predicted_label=obj["predicted_label"],
            true_label=obj["true_label"],
            score=float(score),
            class_tag=obj["class_tag"],
            split=obj["split"],
        )
    except ValueError as exc:
        raise MalformedManifest(str(exc), lineno) from None


def load_manifest(path, check_assets: bool = True) -> list[PredictionRecord]:
    """Parse a JSONL manifest, validating every referenced raster.

    Raises:
        MalformedManifest: bad syntax, schema violation, duplicate id, or a
            truth box outside the image (the offending line is reported).
        MissingAsset: an image or saliency file is absent or unparseable.
        DimensionMismatch: image and saliency sizes differ.
    """
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot read manifest {path}: {exc}") from exc

    records = []
    seen = set()
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            raise MalformedManifest("blank line", lineno)
        record = _parse_line(line, lineno)
        if record.id in seen:
            raise MalformedManifest(f"duplicate id {record.id!r}", lineno)
        seen.add(record.id)
        if check_assets:
            image, _ = load_record_images(record, path.parent)
            if record.truth_box is not None and not record.truth_box.within(image.width, image.height):
                raise MalformedManifest(
                    f"truth_box {record.truth_box.as_list()} exceeds image "
                    f"{image.width}x{image.height}",
                    lineno,
                )
        records.append(record)
    return records


def save_manifest(records, path) -> None:
    """Write ``records`` as JSONL; equal inputs give byte-identical files."""
    body = "".join(record_to_json(r) + "\n" for r in records)
    try:
        Path(path).write_text(body, encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write manifest {path}: {exc}") from exc
