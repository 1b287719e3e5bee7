"""Saliency Crop Accuracy: IoU with a distance-decay fallback for disjoint boxes."""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import Box2D


@dataclass(frozen=True)
class ScaConfig:
    """Parameters of the SCA score and the aberrancy test.

    ``no_overlap_cap`` is the score a disjoint pair would get at zero centroid
    distance; ``aberrancy_threshold`` is the SCA value below which a
    prediction counts as aberrant (a dissimilarity threshold of ``1 - tau``).
    """

    no_overlap_cap: float = 0.1
    aberrancy_threshold: float = 0.1
    distance_scale_mode: str = "truth_diagonal"

    def __post_init__(self):
        if not (0.0 < self.no_overlap_cap <= 1.0):
            raise ValueError(f"no_overlap_cap must be in (0, 1], got {self.no_overlap_cap}")
        if not (0.0 <= self.aberrancy_threshold < 1.0):
            raise ValueError(f"aberrancy_threshold must be in [0, 1), got {self.aberrancy_threshold}")
        if self.distance_scale_mode != "truth_diagonal":
            raise ValueError(f"unsupported distance_scale_mode {self.distance_scale_mode!r}")

    @property
    def dissimilarity_threshold(self) -> float:
        return 1.0 - self.aberrancy_threshold


def intersection_area(a: Box2D, b: Box2D) -> float:
    w = min(a.x1, b.x1) - max(a.x0, b.x0)
    h = min(a.y1, b.y1) - max(a.y0, b.y0)
    if w <= 0 or h <= 0:
        return 0.0
    return w * h


def iou(a: Box2D, b: Box2D) -> float:
    inter = intersection_area(a, b)
    if inter == 0.0:
        return 0.0
    return inter / (a.area + b.area - inter)


def centroid_distance(a: Box2D, b: Box2D) -> float:
    (ax, ay), (bx, by) = a.center, b.center
    return math.hypot(ax - bx, ay - by)


def sca(pred: Box2D, truth: Box2D, cfg: ScaConfig = ScaConfig()) -> float:
    """Score how well the saliency crop ``pred`` matches the true region.

    Overlapping boxes score their IoU. Disjoint boxes (including ones that
    only share an edge) score ``cap / (1 + d / diag(truth))`` where ``d`` is the
    centroid distance, so the value is at most ``cap`` and decays like ``1/d``.
    Note the normalization uses the *truth* box only.
    """
    overlap = iou(pred, truth)
    if overlap > 0.0:
        return overlap
    return cfg.no_overlap_cap / (1.0 + centroid_distance(pred, truth) / truth.diagonal)


def dissimilarity(sca_value: float) -> float:
    if not (0.0 <= sca_value <= 1.0) or math.isnan(sca_value):
        raise ValueError(f"sca value {sca_value} outside [0, 1]")
    return 1.0 - sca_value


def is_aberrant(pred: Box2D, truth: Box2D, cfg: ScaConfig = ScaConfig()) -> bool:
    # strict: a score exactly at the threshold is not aberrant
    return sca(pred, truth, cfg) < cfg.aberrancy_threshold
