"""Reference crop descriptor and the embeddings CSV interchange format.

The descriptor is a fixed 32-component vector, in this order:

====== ===== ==========================================================
index  count feature
====== ===== ==========================================================
0-15   16    intensity histogram of the image channel (fraction per bin)
16-23  8     gradient-orientation histogram, magnitude weighted, sum 1
24     1     log aspect ratio (width / height) of the source box
25     1     source box area / image area
26-27  2     saliency-weighted centroid offset from stack center (x, y) / S
28-29  2     saliency-weighted coordinate std (x, y) / S
30     1     mean saliency
31     1     orientation anisotropy (max bin - min bin)
====== ===== ==========================================================

The vector is scaled to unit Euclidean norm unless it is all zero.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import DimensionMismatch, IoFailure, MalformedEmbeddings
from .saliency import CropStack

DIM = 32
INTENSITY_BINS = 16
ORIENTATION_BINS = 8


@dataclass(frozen=True, eq=False)
class EmbeddingVector:
    record_id: str
    values: np.ndarray
    degenerate: bool = False

    def __eq__(self, other):
        if not isinstance(other, EmbeddingVector):
            return NotImplemented
        return (
            self.record_id == other.record_id
            and self.values.shape == other.values.shape
            and bool(np.array_equal(self.values, other.values))
        )

    def __hash__(self):
        return hash((self.record_id, self.values.tobytes()))


def intensity_histogram(channel: np.ndarray, bins: int = INTENSITY_BINS) -> np.ndarray:
    idx = np.minimum((channel * bins).astype(np.intp), bins - 1)
    return np.bincount(idx.ravel(), minlength=bins) / channel.size


def orientation_histogram(channel: np.ndarray, bins: int = ORIENTATION_BINS) -> np.ndarray:
    """Magnitude-weighted histogram of gradient orientations folded to [0, pi).

    Gradients are central differences on interior pixels. Returns all zeros
    when the channel has no gradient at all.
    """
    gx = (channel[1:-1, 2:] - channel[1:-1, :-2]) / 2.0
    gy = (channel[2:, 1:-1] - channel[:-2, 1:-1]) / 2.0
    mag = np.hypot(gx, gy)
    angle = np.arctan2(gy, gx)
    angle = np.where(angle < 0, angle + math.pi, angle)
    angle = np.where(angle >= math.pi, angle - math.pi, angle)
    idx = np.minimum((angle / (math.pi / bins)).astype(np.intp), bins - 1)
    hist = np.bincount(idx.ravel(), weights=mag.ravel(), minlength=bins)
    total = hist.sum()
    if total <= 0:
        return np.zeros(bins)
    return hist / total


def raw_descriptor(stack: CropStack) -> np.ndarray:
    """Unnormalized descriptor; see the module docstring for the layout."""
    size = stack.size
    img = stack.channel_image
    sal = stack.channel_saliency
    box = stack.source_box

    orient = orientation_histogram(img)
    coords = np.arange(size) + 0.5
    weight = sal.sum()
    if weight > 0:
        wx = sal.sum(axis=0)
        wy = sal.sum(axis=1)
        mx = float(wx @ coords / weight)
        my = float(wy @ coords / weight)
        sx = math.sqrt(max(float(wx @ (coords - mx) ** 2 / weight), 0.0))
        sy = math.sqrt(max(float(wy @ (coords - my) ** 2 / weight), 0.0))
        offset = [(mx - size / 2) / size, (my - size / 2) / size]
        spread = [sx / size, sy / size]
    else:
        offset = [0.0, 0.0]
        spread = [0.0, 0.0]

    return np.concatenate(
        [
            intensity_histogram(img),
            orient,
            [math.log(box.width / box.height)],
            [box.area / (stack.image_width * stack.image_height)],
            offset,
            spread,
            [float(sal.mean())],
            [float(orient.max() - orient.min())],
        ]
    )


def embed_reference(stack: CropStack, record_id: str = "") -> EmbeddingVector:
    raw = raw_descriptor(stack)
    norm = float(np.linalg.norm(raw))
    if norm == 0.0:
        return EmbeddingVector(record_id, raw, degenerate=True)
    return EmbeddingVector(record_id, raw / norm)


def save_embeddings(vectors, path) -> None:
    """Write ``id,e0,...,e{D-1}`` rows with round-trip exact decimals."""
    vectors = list(vectors)
    dim = len(vectors[0].values) if vectors else DIM
    try:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(["id"] + [f"e{i}" for i in range(dim)])
            for v in vectors:
                if len(v.values) != dim:
                    raise DimensionMismatch(f"{v.record_id!r} has {len(v.values)} components, expected {dim}")
                writer.writerow([v.record_id] + [repr(float(x)) for x in v.values])
    except OSError as exc:
        raise IoFailure(f"cannot write embeddings {path}: {exc}") from exc


def load_embeddings(path) -> list[EmbeddingVector]:
    """Read an embeddings CSV. The header fixes the dimension.

    Raises:
        MalformedEmbeddings: bad header, unparseable number, or duplicate id.
        DimensionMismatch: a row whose width disagrees with the header.
    """
    try:
        with open(Path(path), newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise IoFailure(f"cannot read embeddings {path}: {exc}") from exc
    if not rows:
        raise MalformedEmbeddings(f"{path}: missing header")
    header = rows[0]
    dim = len(header) - 1
    if dim < 1 or header[0] != "id" or header[1:] != [f"e{i}" for i in range(dim)]:
        raise MalformedEmbeddings(f"{path}: header must be id,e0,...,e{{D-1}}")

    out = []
    seen = set()
    for lineno, row in enumerate(rows[1:], start=2):
        if len(row) != dim + 1:
            raise DimensionMismatch(f"{path} line {lineno}: {len(row) - 1} components, expected {dim}")
        rid = row[0]
        if rid in seen:
            raise MalformedEmbeddings(f"{path} line {lineno}: duplicate id {rid!r}")
        seen.add(rid)
        try:
            values = np.array([float(x) for x in row[1:]])
        except ValueError:
            raise MalformedEmbeddings(f"{path} line {lineno}: non-numeric component") from None
        if not np.all(np.isfinite(values)):
            raise MalformedEmbeddings(f"{path} line {lineno}: non-finite component")
        out.append(EmbeddingVector(rid, values, degenerate=not values.any()))
    return out
