"""Seeded synthetic corpus of radiograph-like images with controlled aberrancy.

Each generator class renders one visual motif on a bright bone band over a
dark background. The truth box encloses the motif. A non-aberrant record gets
a saliency bump centred inside the truth box; an aberrant record gets a bump
on a lookalike structure in the opposite corner of the image, more than half
the image diagonal away from the truth centroid, so its crop cannot overlap
the truth box.
"""

from __future__ import annotations

import math
from dataclasses import asdict, dataclass
from pathlib import Path

import numpy as np

from .core import Box2D, PredictionRecord, save_manifest
from .errors import InvalidConfig
from .pgm import write_pgm

CLASS_TAGS = (
    "device-screws",
    "no-lines",
    "vertical",
    "device-plate",
    "zoomed-out",
    "horizontal-oblique",
)
DEFAULT_RATES = (0.0, 0.25, 0.05, 0.01, 0.81, 0.05)
# motifs without a visible fracture line draw true positives at 1 - positive_fraction
LINELESS = frozenset({"no-lines", "zoomed-out"})

BACKGROUND = 0.08
BONE = 0.6
FRACTURE = 0.2
METAL = 0.95
STUD = 0.35
BAND_WIDTH = 44
BAND_HALF_LENGTH = 40

# (width, height) of the motif region in pixels at 128 px image size
MOTIF_SIZE = {
    "device-screws": (32, 14),
    "no-lines": (20, 20),
    "vertical": (14, 28),
    "device-plate": (14, 32),
    "zoomed-out": (34, 34),
    "horizontal-oblique": (28, 14),
}

SENSITIVITY = 0.9
FALSE_ALARM = 0.1
ABERRANT_TRUE_POSITIVE = 0.1

_STREAM_RECORD = 0
_STREAM_ABERRANT = 1
_STREAM_SPLIT = 2


@dataclass(frozen=True)
class GenConfig:
    n_per_class: int = 100
    image_size: int = 128
    aberrancy_rate_per_class: tuple[float, ...] = DEFAULT_RATES
    positive_fraction: float = 0.8
    noise_sigma: float = 0.05
    seed: int = 42
    train_fraction: float = 0.8

    def validate(self) -> None:
        if self.n_per_class < 1:
            raise InvalidConfig(f"n_per_class must be >= 1, got {self.n_per_class}")
        if self.image_size < 64:
            raise InvalidConfig(f"image_size must be >= 64, got {self.image_size}")
        rates = tuple(self.aberrancy_rate_per_class)
        if len(rates) != len(CLASS_TAGS):
            raise InvalidConfig(f"need {len(CLASS_TAGS)} aberrancy rates, got {len(rates)}")
        if any(not (0.0 <= r <= 1.0) for r in rates):
            raise InvalidConfig(f"aberrancy rates must lie in [0, 1]: {rates}")
        if not (0.0 <= self.positive_fraction <= 1.0):
            raise InvalidConfig(f"positive_fraction must lie in [0, 1], got {self.positive_fraction}")
        if not (0.0 < self.train_fraction < 1.0):
            raise InvalidConfig(f"train_fraction must lie in (0, 1), got {self.train_fraction}")
        if self.noise_sigma < 0 or not math.isfinite(self.noise_sigma):
            raise InvalidConfig(f"noise_sigma must be >= 0, got {self.noise_sigma}")
        if self.seed < 0:
            raise InvalidConfig(f"seed must be non-negative, got {self.seed}")


@dataclass(eq=False)
class SyntheticRecord:
    record: PredictionRecord
    image: np.ndarray
    saliency: np.ndarray
    aberrant: bool
    saliency_center: tuple[float, float]


class _Canvas:
    def __init__(self, size: int):
        self.size = size
        self.pixels = np.full((size, size), BACKGROUND)
        centers = np.arange(size) + 0.5
        self.xs = centers[None, :]
        self.ys = centers[:, None]

    def rect(self, cx, cy, w, h, value):
        mask = (np.abs(self.xs - cx) <= w / 2) & (np.abs(self.ys - cy) <= h / 2)
        self.pixels[mask] = value

    def disc(self, cx, cy, r, value):
        mask = (self.xs - cx) ** 2 + (self.ys - cy) ** 2 <= r * r
        self.pixels[mask] = value

    def segment(self, x0, y0, x1, y1, width, value):
        dx, dy = x1 - x0, y1 - y0
        t = ((self.xs - x0) * dx + (self.ys - y0) * dy) / (dx * dx + dy * dy)
        t = np.clip(t, 0.0, 1.0)
        d = np.hypot(self.xs - (x0 + t * dx), self.ys - (y0 + t * dy))
        self.pixels[d <= width / 2] = value


def _motif_size(tag: str, image_size: int) -> tuple[float, float]:
    w, h = MOTIF_SIZE[tag]
    scale = image_size / 128
    return w * scale, h * scale


def _draw_scene(canvas: _Canvas, tag: str, cx: float, cy: float, rng: np.random.Generator) -> None:
    """Render the class motif centred at ``(cx, cy)``."""
    scale = canvas.size / 128
    w, h = _motif_size(tag, canvas.size)
    band, half = BAND_WIDTH * scale, BAND_HALF_LENGTH * scale

    if tag == "zoomed-out":
        # the whole limb shrinks to a thin bone inside a wide field of view
        canvas.rect(cx, cy, 6 * scale, h * 0.85, BONE)
        canvas.disc(cx, cy - h * 0.42, 4 * scale, BONE)
        return

    if w > h:
        canvas.rect(cx, cy, 2 * half, band, BONE)
    else:
        canvas.rect(cx, cy, band, 2 * half, BONE)

    if tag == "vertical":
        canvas.segment(cx, cy - h / 2, cx, cy + h / 2, 2 * scale, FRACTURE)
    elif tag == "horizontal-oblique":
        if rng.random() < 2 / 3:
            canvas.segment(cx - w / 2, cy, cx + w / 2, cy, 2 * scale, FRACTURE)
        else:
            angle = math.radians(rng.uniform(25, 35)) * (1 if rng.random() < 0.5 else -1)
            dx, dy = (w / 2) * math.cos(angle), (w / 2) * math.sin(angle)
            dy = max(-h / 2, min(h / 2, dy))
            canvas.segment(cx - dx, cy - dy, cx + dx, cy + dy, 2 * scale, FRACTURE)
    elif tag == "device-plate":
        canvas.rect(cx, cy, w, h, METAL)
    elif tag == "device-screws":
        canvas.rect(cx, cy, w, h, METAL)
        for offset in (-w / 3, 0.0, w / 3):
            canvas.disc(cx + offset, cy, 3 * scale, STUD)


def _bump(size: int, cx: float, cy: float, w: float, h: float) -> np.ndarray:
    """Gaussian bump whose half-maximum extent is ``w x h``."""
    centers = np.arange(size) + 0.5
    k = 2 * math.sqrt(2 * math.log(2))
    sx, sy = w / k, h / k
    gx = np.exp(-0.5 * ((centers - cx) / sx) ** 2)
    gy = np.exp(-0.5 * ((centers - cy) / sy) ** 2)
    return gy[:, None] * gx[None, :]


def _place(size: int, rng: np.random.Generator):
    """Truth centre near one corner and a decoy centre near the opposite one."""
    lo, hi = 0.17 * size, 0.235 * size
    half_diag = size * math.sqrt(2) / 2
    flip_x, flip_y = rng.random() < 0.5, rng.random() < 0.5
    while True:
        tx, ty = rng.uniform(lo, hi, size=2)
        ax, ay = size - rng.uniform(lo, hi, size=2)
        if math.hypot(ax - tx, ay - ty) > half_diag:
            break
    if flip_x:
        tx, ax = size - tx, size - ax
    if flip_y:
        ty, ay = size - ty, size - ay
    return (float(tx), float(ty)), (float(ax), float(ay))


def _ranked(seed: int, cls: int, stream: int, n: int) -> np.ndarray:
    return np.random.default_rng([seed, cls, stream]).permutation(n)


def generate_record(cfg: GenConfig, cls: int, index: int, aberrant: bool, split: str) -> SyntheticRecord:
    tag = CLASS_TAGS[cls]
    size = cfg.image_size
    rng = np.random.default_rng([cfg.seed, cls, _STREAM_RECORD, index])
    w, h = _motif_size(tag, size)
    (tx, ty), (ax, ay) = _place(size, rng)

    canvas = _Canvas(size)
    _draw_scene(canvas, tag, tx, ty, rng)
    if aberrant:
        # lookalike structure the classifier latches onto instead of the finding
        _draw_scene(canvas, tag, ax, ay, rng)
        sx, sy = ax, ay
    else:
        sx = tx + rng.uniform(-0.1, 0.1) * w
        sy = ty + rng.uniform(-0.1, 0.1) * h
    pixels = canvas.pixels + rng.normal(0.0, cfg.noise_sigma, size=canvas.pixels.shape)
    image = np.rint(np.clip(pixels, 0.0, 1.0) * 255).astype(np.uint8)
    saliency = np.rint(_bump(size, sx, sy, w, h) * 255).astype(np.uint8)

    if aberrant:
        predicted = "pos"
        truth = "pos" if rng.random() < ABERRANT_TRUE_POSITIVE else "neg"
    else:
        p_true = 1 - cfg.positive_fraction if tag in LINELESS else cfg.positive_fraction
        truth = "pos" if rng.random() < p_true else "neg"
        p_pred = SENSITIVITY if truth == "pos" else FALSE_ALARM
        predicted = "pos" if rng.random() < p_pred else "neg"
    if predicted == "pos":
        score = float(rng.uniform(0.5, 1.0))
    else:
        score = float(rng.uniform(0.0, 0.5))

    rid = f"{tag}-{index:04d}"
    record = PredictionRecord(
        id=rid,
        image=f"images/{rid}.pgm",
        saliency=f"saliency/{rid}.pgm",
        truth_box=Box2D(tx - w / 2, ty - h / 2, tx + w / 2, ty + h / 2),
        predicted_label=predicted,
        true_label=truth,
        score=score,
        class_tag=tag,
        split=split,
    )
    return SyntheticRecord(record, image, saliency, aberrant, (sx, sy))


def iter_corpus(cfg: GenConfig):
    """Yield every :class:`SyntheticRecord` in class-major, index order."""
    cfg.validate()
    n = cfg.n_per_class
    n_train = round(cfg.train_fraction * n)
    for cls, rate in enumerate(cfg.aberrancy_rate_per_class):
        n_aberrant = round(rate * n)
        aberrant_rank = _ranked(cfg.seed, cls, _STREAM_ABERRANT, n)
        split_rank = _ranked(cfg.seed, cls, _STREAM_SPLIT, n)
        for index in range(n):
            yield generate_record(
                cfg,
                cls,
                index,
                aberrant=bool(aberrant_rank[index] < n_aberrant),
                split="train" if split_rank[index] < n_train else "test",
            )


def generate_corpus(cfg: GenConfig, out_dir) -> dict:
    """Write images, saliency maps and ``manifest.jsonl`` under ``out_dir``.

    Returns a JSON-serializable generation summary.
    """
    out = Path(out_dir)
    (out / "images").mkdir(parents=True, exist_ok=True)
    (out / "saliency").mkdir(parents=True, exist_ok=True)
    records = []
    per_class = {tag: {"records": 0, "aberrant": 0, "train": 0, "test": 0} for tag in CLASS_TAGS}
    for item in iter_corpus(cfg):
        rec = item.record
        write_pgm(out / rec.image, item.image)
        write_pgm(out / rec.saliency, item.saliency)
        records.append(rec)
        stats = per_class[rec.class_tag]
        stats["records"] += 1
        stats["aberrant"] += item.aberrant
        stats[rec.split] += 1
    save_manifest(records, out / "manifest.jsonl")
    return {
        "manifest": str(out / "manifest.jsonl"),
        "records": len(records),
        "train": sum(s["train"] for s in per_class.values()),
        "test": sum(s["test"] for s in per_class.values()),
        "aberrant": sum(s["aberrant"] for s in per_class.values()),
        "per_class": per_class,
        "config": {**asdict(cfg), "aberrancy_rate_per_class": list(cfg.aberrancy_rate_per_class)},
    }
