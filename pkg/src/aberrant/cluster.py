"""K-means cluster formation, cluster-count sweep metrics, and KNN routing.

Clusters are formed with k-means on the training embeddings; new samples are
routed to an existing cluster by a majority vote of their nearest training
neighbours. All randomness comes from ``numpy.random.default_rng(seed)``
(PCG64 bit generator seeded through ``SeedSequence``), so a seed fully
determines a fit.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import (
    DegenerateLabeling,
    EmptyModel,
    IoFailure,
    LengthMismatch,
    TooFewPoints,
)

MAX_ITER = 300


@dataclass(eq=False)
class ClusterModel:
    k: int
    centroids: np.ndarray
    train_embeddings: np.ndarray
    train_assignments: np.ndarray
    seed: int
    inertia: float
    train_ids: list[str] = field(default_factory=list)
    n_iter: int = 0


@dataclass(frozen=True)
class SweepRow:
    k: int
    silhouette: float
    ari_vs_reference: float | None
    inertia: float


def _sq_dists(X: np.ndarray, C: np.ndarray) -> np.ndarray:
    # explicit differences rather than the |x|^2 - 2xc + |c|^2 expansion,
    # which loses exactness for near-duplicate points
    diff = X[:, None, :] - C[None, :, :]
    return np.einsum("ijk,ijk->ij", diff, diff)


def _inertia(X, centroids, labels) -> float:
    diff = X - centroids[labels]
    return float(np.einsum("ij,ij->", diff, diff))


def kmeans_plusplus(X: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """Greedy k-means++ seeding (``2 + ln k`` candidate draws per center)."""
    n = X.shape[0]
    trials = 2 + int(math.log(k))
    chosen = [int(rng.integers(n))]
    closest = _sq_dists(X, X[chosen])[:, 0]
    for _ in range(1, k):
        potential = closest.sum()
        if potential <= 0:
            # every remaining point duplicates a center; take the first unused
            unused = np.setdiff1d(np.arange(n), chosen)
            chosen.append(int(unused[0]))
            continue
        cumulative = np.cumsum(closest)
        draws = rng.random(trials) * potential
        candidates = np.minimum(np.searchsorted(cumulative, draws), n - 1)
        cand_d = np.minimum(closest[None, :], _sq_dists(X[candidates], X).reshape(trials, n))
        best = int(np.argmin(cand_d.sum(axis=1)))
        chosen.append(int(candidates[best]))
        closest = cand_d[best]
    return X[chosen].copy()


def lloyd(X: np.ndarray, centroids: np.ndarray, max_iter: int = MAX_ITER):
    """Run Lloyd iterations, yielding ``(centroids, labels, inertia)`` each step.

    Nearest-centroid ties go to the lowest index. A cluster left empty is
    reseeded with the point farthest from its current centroid. Stops when the
    assignment no longer changes or after ``max_iter`` updates.
    """
    centroids = centroids.copy()
    k = centroids.shape[0]
    labels = None
    for _ in range(max_iter):
        new_labels = np.argmin(_sq_dists(X, centroids), axis=1)
        counts = np.bincount(new_labels, minlength=k)
        while np.any(counts == 0):
            empty = int(np.flatnonzero(counts == 0)[0])
            d = np.einsum("ij,ij->i", X - centroids[new_labels], X - centroids[new_labels])
            movable = counts[new_labels] > 1
            far = int(np.flatnonzero(movable)[np.argmax(d[movable])])
            new_labels[far] = empty
            counts = np.bincount(new_labels, minlength=k)
        if labels is not None and np.array_equal(new_labels, labels):
            break
        labels = new_labels
        centroids = np.stack([X[labels == c].mean(axis=0) for c in range(k)])
        yield centroids, labels, _inertia(X, centroids, labels)


def kmeans_fit(X, k: int, seed: int = 0, ids=None) -> ClusterModel:
    """Fit ``k`` clusters to the rows of ``X``.

    Raises:
        TooFewPoints: fewer rows (or fewer distinct rows) than ``k``.
    """
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("X must be a 2-D array")
    n = X.shape[0]
    if k < 1:
        raise ValueError(f"k must be >= 1, got {k}")
    if n < k:
        raise TooFewPoints(f"{n} points cannot form {k} clusters")
    if len(np.unique(X, axis=0)) < k:
        raise TooFewPoints(f"fewer than {k} distinct points")

    rng = np.random.default_rng(seed)
    centroids = kmeans_plusplus(X, k, rng)
    labels = np.argmin(_sq_dists(X, centroids), axis=1)
    n_iter = 0
    for centroids, labels, _ in lloyd(X, centroids):
        n_iter += 1
    return ClusterModel(
        k=k,
        centroids=centroids,
        train_embeddings=X.copy(),
        train_assignments=np.asarray(labels, dtype=np.intp),
        seed=seed,
        inertia=_inertia(X, centroids, labels),
        train_ids=list(ids) if ids is not None else [str(i) for i in range(n)],
        n_iter=n_iter,
    )


def _pairwise(X: np.ndarray) -> np.ndarray:
    return np.sqrt(_sq_dists(X, X))


def silhouette(X, labels) -> float:
    """Mean silhouette coefficient; members of singleton clusters score 0."""
    X = np.asarray(X, dtype=np.float64)
    labels = np.asarray(labels)
    if len(labels) != len(X):
        raise LengthMismatch(f"{len(X)} points but {len(labels)} labels")
    clusters, inverse = np.unique(labels, return_inverse=True)
    if len(clusters) < 2:
        raise DegenerateLabeling("silhouette needs at least two clusters")
    dist = _pairwise(X)
    counts = np.bincount(inverse)
    # sums[i, c] = total distance from point i to members of cluster c
    sums = np.stack([dist[:, inverse == c].sum(axis=1) for c in range(len(clusters))], axis=1)
    idx = np.arange(len(X))
    own = counts[inverse]
    a = np.where(own > 1, sums[idx, inverse] / np.maximum(own - 1, 1), 0.0)
    means = sums / counts[None, :]
    means[idx, inverse] = np.inf
    b = means.min(axis=1)
    denom = np.maximum(a, b)
    s = np.where((own > 1) & (denom > 0), (b - a) / np.where(denom > 0, denom, 1.0), 0.0)
    return float(s.mean())


def _comb2(x):
    x = np.asarray(x, dtype=np.float64)
    return x * (x - 1) / 2


def ari(labels_a, labels_b) -> float:
    """Adjusted Rand index from the contingency table.

    The index is undefined only when both partitions are trivial and identical
    (all singletons, or one block); that case returns 1.0.
    """
    labels_a = np.asarray(labels_a)
    labels_b = np.asarray(labels_b)
    if labels_a.shape != labels_b.shape:
        raise LengthMismatch(f"label arrays differ in length: {len(labels_a)} vs {len(labels_b)}")
    n = len(labels_a)
    if n < 2:
        raise ValueError("ari needs at least two items")
    _, ia = np.unique(labels_a, return_inverse=True)
    _, ib = np.unique(labels_b, return_inverse=True)
    table = np.zeros((ia.max() + 1, ib.max() + 1), dtype=np.int64)
    np.add.at(table, (ia, ib), 1)
    index = _comb2(table).sum()
    sum_a = _comb2(table.sum(axis=1)).sum()
    sum_b = _comb2(table.sum(axis=0)).sum()
    expected = sum_a * sum_b / _comb2(n)
    max_index = (sum_a + sum_b) / 2
    if max_index == expected:
        return 1.0
    return float((index - expected) / (max_index - expected))


def sweep_k(X, k_range, seed: int = 0, reference_labels=None) -> list[SweepRow]:
    """Fit one model per ``k`` in the inclusive ``(k_min, k_max)`` range."""
    X = np.asarray(X, dtype=np.float64)
    k_min, k_max = k_range
    if k_min < 2 or k_max > len(X) - 1 or k_min > k_max:
        raise ValueError(f"k range {k_min}:{k_max} must lie within [2, {len(X) - 1}]")
    rows = []
    for k in range(k_min, k_max + 1):
        model = kmeans_fit(X, k, seed)
        score = ari(reference_labels, model.train_assignments) if reference_labels is not None else None
        rows.append(SweepRow(k, silhouette(X, model.train_assignments), score, model.inertia))
    return rows


def knn_assign(model: ClusterModel, x, k_nn: int = 5) -> int:
    """Route ``x`` to a cluster by majority vote of its ``k_nn`` nearest training points.

    Distance ties favour the lower training index; vote ties favour the tied
    cluster holding the nearest of the voting neighbours.
    """
    train = model.train_embeddings
    if train is None or len(train) == 0:
        raise EmptyModel("model has no training embeddings")
    if not (1 <= k_nn <= len(train)):
        raise ValueError(f"k_nn must be in [1, {len(train)}], got {k_nn}")
    x = np.asarray(getattr(x, "values", x), dtype=np.float64)
    d = _sq_dists(x[None, :], train)[0]
    order = np.argsort(d, kind="stable")[:k_nn]
    votes = model.train_assignments[order]
    counts = np.bincount(votes, minlength=model.k)
    tied = counts == counts.max()
    for c in votes:
        if tied[c]:
            return int(c)
    raise AssertionError("unreachable")


def save_model(model: ClusterModel, path) -> None:
    doc = {
        "k": model.k,
        "seed": model.seed,
        "centroids": model.centroids.tolist(),
        "train_ids": list(model.train_ids),
        "train_assignments": [int(c) for c in model.train_assignments],
        "inertia": model.inertia,
        "train_embeddings": model.train_embeddings.tolist(),
    }
    try:
        Path(path).write_text(json.dumps(doc, indent=1) + "\n", encoding="utf-8")
    except OSError as exc:
        raise IoFailure(f"cannot write model {path}: {exc}") from exc


def load_model(path) -> ClusterModel:
    try:
        doc = json.loads(Path(path).read_text(encoding="utf-8"))
    except OSError as exc:
        raise IoFailure(f"cannot read model {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ValueError(f"{path}: invalid JSON ({exc.msg})") from None
    try:
        model = ClusterModel(
            k=int(doc["k"]),
            centroids=np.asarray(doc["centroids"], dtype=np.float64),
            train_embeddings=np.asarray(doc["train_embeddings"], dtype=np.float64),
            train_assignments=np.asarray(doc["train_assignments"], dtype=np.intp),
            seed=int(doc["seed"]),
            inertia=float(doc["inertia"]),
            train_ids=list(doc["train_ids"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ValueError(f"{path}: malformed cluster model ({exc})") from None
    if len(model.train_ids) != len(model.train_assignments) or len(model.train_embeddings) != len(
        model.train_assignments
    ):
        raise ValueError(f"{path}: train ids, embeddings and assignments differ in length")
    return model
