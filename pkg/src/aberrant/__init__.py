"""Detect and gate aberrant classifier predictions from saliency crops."""

from .cluster import ClusterModel, SweepRow, ari, kmeans_fit, knn_assign, silhouette, sweep_k
from .core import Box2D, GrayImage, PredictionRecord, SaliencyMap, load_manifest, save_manifest
from .embed import EmbeddingVector, embed_reference, load_embeddings, save_embeddings
from .evaluate import (
    BoxStats,
    ClusterReport,
    DensityCurve,
    GateDecision,
    box_stats,
    cluster_aberrancy,
    gate_clusters,
    kde,
    production_metrics,
)
from .saliency import CropConfig, CropStack, crop_and_stack, extract_crop_box
from .sca import ScaConfig, centroid_distance, dissimilarity, iou, is_aberrant, sca
from .syngen import GenConfig, generate_corpus

__version__ = "0.1.0"

__all__ = [
    "ari",
    "Box2D",
    "box_stats",
    "BoxStats",
    "centroid_distance",
    "cluster_aberrancy",
    "ClusterModel",
    "ClusterReport",
    "crop_and_stack",
    "CropConfig",
    "CropStack",
    "DensityCurve",
    "dissimilarity",
    "embed_reference",
    "EmbeddingVector",
    "extract_crop_box",
    "gate_clusters",
    "GateDecision",
    "GenConfig",
    "generate_corpus",
    "GrayImage",
    "iou",
    "is_aberrant",
    "kde",
    "kmeans_fit",
    "knn_assign",
    "load_embeddings",
    "load_manifest",
    "PredictionRecord",
    "production_metrics",
    "SaliencyMap",
    "save_embeddings",
    "save_manifest",
    "sca",
    "ScaConfig",
    "silhouette",
    "sweep_k",
    "SweepRow",
]

