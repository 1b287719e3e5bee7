"""Record-level glue between the manifest and the per-module operations."""

from __future__ import annotations

from pathlib import Path

import numpy as np

from .cluster import ClusterModel, knn_assign
from .core import load_record_images
from .embed import EmbeddingVector, embed_reference
from .errors import EmptySaliency, MalformedEmbeddings
from .saliency import CropConfig, crop_and_stack, extract_crop_box
from .sca import ScaConfig, sca


def score_records(records, root, crop_cfg: CropConfig = CropConfig(), sca_cfg: ScaConfig = ScaConfig()):
    """Return ``(rows, skipped)`` where each row is ``(record, crop_box, sca_value)``.

    Records without a truth box are counted in ``skipped["no_truth_box"]``;
    records with an all-zero saliency map in ``skipped["empty_saliency"]``.
    """
    rows = []
    skipped = {"no_truth_box": 0, "empty_saliency": 0}
    for rec in records:
        if rec.truth_box is None:
            skipped["no_truth_box"] += 1
            continue
        _, sal = load_record_images(rec, root)
        try:
            box = extract_crop_box(sal, crop_cfg)
        except EmptySaliency:
            skipped["empty_saliency"] += 1
            continue
        rows.append((rec, box, sca(box, rec.truth_box, sca_cfg)))
    return rows, skipped


def sca_by_record(records, root, crop_cfg: CropConfig = CropConfig(), sca_cfg: ScaConfig = ScaConfig()):
    """Per-record SCA aligned with ``records``; ``None`` where it cannot be scored."""
    rows, _ = score_records(records, root, crop_cfg, sca_cfg)
    values = {rec.id: value for rec, _, value in rows}
    return [values.get(rec.id) for rec in records]


def embed_records(records, root, crop_cfg: CropConfig = CropConfig()) -> list[EmbeddingVector]:
    out = []
    for rec in records:
        img, sal = load_record_images(rec, root)
        try:
            box = extract_crop_box(sal, crop_cfg)
        except EmptySaliency as exc:
            raise EmptySaliency(f"record {rec.id!r}: {exc}") from None
        out.append(embed_reference(crop_and_stack(img, sal, box, crop_cfg), rec.id))
    return out


def align_embeddings(records, vectors) -> np.ndarray:
    """Stack the embedding of every record, in manifest order."""
    by_id = {v.record_id: v.values for v in vectors}
    missing = [r.id for r in records if r.id not in by_id]
    if missing:
        raise MalformedEmbeddings(f"no embedding for {len(missing)} record(s), e.g. {missing[0]!r}")
    return np.array([by_id[r.id] for r in records], dtype=np.float64)


def assign_records(model: ClusterModel, records, vectors, k_nn: int = 5) -> list[tuple[str, int, str]]:
    """Cluster of every record as ``(id, cluster, source)``.

    Training records keep their fitted k-means cluster (``source="train"``);
    everything else is routed by KNN (``source="knn"``).
    """
    fitted = {rid: int(c) for rid, c in zip(model.train_ids, model.train_assignments)}
    X = align_embeddings(records, vectors)
    out = []
    for rec, x in zip(records, X):
        if rec.id in fitted:
            out.append((rec.id, fitted[rec.id], "train"))
        else:
            out.append((rec.id, knn_assign(model, x, k_nn), "knn"))
    return out


def manifest_root(manifest_path) -> Path:
    return Path(manifest_path).resolve().parent
