"""Per-cluster SCA analysis, aberrancy rates, cluster gating and production metrics."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .errors import EmptyInput, LengthMismatch

GRID_SIZE = 256
GRID_RANGE = (-0.2, 1.2)
FALLBACK_BANDWIDTH = 0.01

_trapezoid = getattr(np, "trapezoid", None) or np.trapz


def default_grid(size: int = GRID_SIZE) -> np.ndarray:
    return np.linspace(GRID_RANGE[0], GRID_RANGE[1], size)


@dataclass(frozen=True, eq=False)
class DensityCurve:
    grid: np.ndarray
    density: np.ndarray
    bandwidth: float

    def integral(self) -> float:
        return float(_trapezoid(self.density, self.grid))

    def to_dict(self) -> dict:
        return {
            "bandwidth": self.bandwidth,
            "grid": self.grid.tolist(),
            "density": self.density.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> DensityCurve:
        return cls(
            np.asarray(doc["grid"], dtype=np.float64),
            np.asarray(doc["density"], dtype=np.float64),
            float(doc["bandwidth"]),
        )


@dataclass(frozen=True)
class BoxStats:
    min: float
    q1: float
    median: float
    q3: float
    max: float
    whisker_low: float
    whisker_high: float
    outliers: tuple[float, ...] = ()

    def to_dict(self) -> dict:
        return {
            "min": self.min,
            "q1": self.q1,
            "median": self.median,
            "q3": self.q3,
            "max": self.max,
            "whisker_low": self.whisker_low,
            "whisker_high": self.whisker_high,
            "outliers": list(self.outliers),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> BoxStats:
        return cls(**{**doc, "outliers": tuple(doc["outliers"])})


@dataclass
class ClusterReport:
    cluster_id: int
    n: int
    sca_values: list[float]
    density: DensityCurve | None
    box: BoxStats | None
    aberrancy_rate: float | None
    n_unscored: int = 0
    gated: bool = False
    precision: float | None = None
    recall_contribution: float = 0.0

    def to_dict(self) -> dict:
        return {
            "cluster_id": self.cluster_id,
            "n": self.n,
            "n_unscored": self.n_unscored,
            "aberrancy_rate": self.aberrancy_rate,
            "gated": self.gated,
            "precision": self.precision,
            "recall_contribution": self.recall_contribution,
            "box": None if self.box is None else self.box.to_dict(),
            "density": None if self.density is None else self.density.to_dict(),
            "sca_values": list(self.sca_values),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> ClusterReport:
        return cls(
            cluster_id=int(doc["cluster_id"]),
            n=int(doc["n"]),
            sca_values=[float(v) for v in doc["sca_values"]],
            density=None if doc["density"] is None else DensityCurve.from_dict(doc["density"]),
            box=None if doc["box"] is None else BoxStats.from_dict(doc["box"]),
            aberrancy_rate=doc["aberrancy_rate"],
            n_unscored=int(doc.get("n_unscored", 0)),
            gated=bool(doc.get("gated", False)),
            precision=doc.get("precision"),
            recall_contribution=float(doc.get("recall_contribution", 0.0)),
        )


@dataclass(frozen=True)
class GateDecision:
    kept: frozenset
    gated: frozenset
    rate_threshold: float = 0.2

    def to_dict(self) -> dict:
        return {
            "rate_threshold": self.rate_threshold,
            "kept": sorted(self.kept),
            "gated": sorted(self.gated),
        }

    @classmethod
    def from_dict(cls, doc: dict) -> GateDecision:
        return cls(
            kept=frozenset(int(c) for c in doc["kept"]),
            gated=frozenset(int(c) for c in doc["gated"]),
            rate_threshold=float(doc["rate_threshold"]),
        )


@dataclass
class ProductionMetrics:
    """Precision/recall of positive predictions before and after gating.

    Precision is ``None`` where there are no positive predictions; recall is
    ``None`` where there are no actual positives.
    """

    baseline_precision: float | None
    gated_precision: float | None
    baseline_recall: float | None
    gated_recall: float | None
    precision_delta: float | None
    recall_delta: float | None
    per_cluster_precision: dict[int, float | None] = field(default_factory=dict)
    per_cluster_recall_contribution: dict[int, float] = field(default_factory=dict)
    counts: dict[str, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "baseline_precision": self.baseline_precision,
            "gated_precision": self.gated_precision,
            "precision_delta": self.precision_delta,
            "baseline_recall": self.baseline_recall,
            "gated_recall": self.gated_recall,
            "recall_delta": self.recall_delta,
            "per_cluster_precision": {str(c): p for c, p in sorted(self.per_cluster_precision.items())},
            "per_cluster_recall_contribution": {
                str(c): r for c, r in sorted(self.per_cluster_recall_contribution.items())
            },
            "counts": dict(self.counts),
        }


def silverman_bandwidth(values) -> float:
    """``0.9 * min(sd, IQR / 1.34) * n^(-1/5)``, or 0.01 when that is zero.

    A spread at rounding-error scale (ties that differ only in the last bits)
    counts as zero.
    """
    x = np.asarray(values, dtype=np.float64)
    n = len(x)
    sd = float(np.std(x, ddof=1)) if n > 1 else 0.0
    q75, q25 = np.percentile(x, [75, 25])
    h = 0.9 * min(sd, (q75 - q25) / 1.34) * n ** (-0.2)
    noise = 1e-12 * max(1.0, float(np.max(np.abs(x))))
    return h if h > noise else FALLBACK_BANDWIDTH


def kde(values, grid=None, bandwidth: float | None = None) -> DensityCurve:
    """Gaussian kernel density estimate of ``values`` evaluated on ``grid``.

    Without an explicit ``bandwidth`` the Silverman value is floored at the
    widest grid step, so that the curve stays resolvable on its grid.
    """
    x = np.asarray(values, dtype=np.float64)
    if x.size == 0:
        raise EmptyInput("kde needs at least one value")
    grid = default_grid() if grid is None else np.asarray(grid, dtype=np.float64)
    if np.any(np.diff(grid) <= 0):
        raise ValueError("grid must be strictly ascending")
    if bandwidth is None:
        step = float(np.max(np.diff(grid))) if grid.size > 1 else 0.0
        h = max(silverman_bandwidth(x), step)
    else:
        h = float(bandwidth)
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    z = (grid[:, None] - x[None, :]) / h
    density = np.exp(-0.5 * z * z).sum(axis=1) / (len(x) * h * math.sqrt(2 * math.pi))
    return DensityCurve(grid, density, h)


def box_stats(values) -> BoxStats:
    """Tukey box-plot summary.

    Quartiles use linear interpolation between order statistics at position
    ``p * (n - 1)`` (the inclusive convention, numpy's default). Whiskers reach
    the most extreme points within 1.5 IQR of the quartiles.
    """
    x = np.sort(np.asarray(values, dtype=np.float64))
    if x.size == 0:
        raise EmptyInput("box_stats needs at least one value")
    q1, median, q3 = (float(v) for v in np.percentile(x, [25, 50, 75]))
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = x[(x >= lo_fence) & (x <= hi_fence)]
    outliers = tuple(float(v) for v in x[(x < lo_fence) | (x > hi_fence)])
    return BoxStats(
        min=float(x[0]),
        q1=q1,
        median=median,
        q3=q3,
        max=float(x[-1]),
        whisker_low=float(inside.min()),
        whisker_high=float(inside.max()),
        outliers=outliers,
    )


def cluster_aberrancy(records, sca_values, assignments, tau: float = 0.1, cluster_ids=None) -> list[ClusterReport]:
    """Aberrancy rate, SCA density and box summary for every cluster.

    ``sca_values[i]`` is ``None`` for a record without a truth box; such
    records are counted in ``n_unscored`` and left out of the rate.
    """
    if not (len(records) == len(sca_values) == len(assignments)):
        raise LengthMismatch(
            f"records ({len(records)}), sca values ({len(sca_values)}) and "
            f"assignments ({len(assignments)}) differ in length"
        )
    ids = set(int(c) for c in assignments)
    if cluster_ids is not None:
        ids |= set(int(c) for c in cluster_ids)

    scored: dict[int, list[float]] = {c: [] for c in ids}
    unscored = dict.fromkeys(ids, 0)
    for value, c in zip(sca_values, assignments):
        if value is None:
            unscored[int(c)] += 1
        else:
            scored[int(c)].append(float(value))

    reports = []
    for c in sorted(ids):
        vals = scored[c]
        if vals:
            rate = sum(v < tau for v in vals) / len(vals)
            density, box = kde(vals), box_stats(vals)
        else:
            rate, density, box = None, None, None
        reports.append(ClusterReport(c, len(vals), vals, density, box, rate, n_unscored=unscored[c]))
    return reports


def gate_clusters(reports, rho: float = 0.2) -> GateDecision:
    """Gate every cluster whose aberrancy rate is strictly above ``rho``.

    ``reports`` is a sequence of :class:`ClusterReport` or a mapping from
    cluster id to rate. Clusters without a rate are kept.
    """
    if isinstance(reports, dict):
        rates = dict(reports)
    else:
        rates = {r.cluster_id: r.aberrancy_rate for r in reports}
    if not rates:
        raise EmptyInput("no clusters to gate")
    gated = frozenset(c for c, r in rates.items() if r is not None and r > rho)
    return GateDecision(kept=frozenset(rates) - gated, gated=gated, rate_threshold=rho)


def _ratio(num: int, den: int) -> float | None:
    return num / den if den else None


def production_metrics(records, assignments, decision: GateDecision) -> ProductionMetrics:
    """Compare precision and recall with and without the gated clusters.

    A record in a gated cluster is treated as withheld: its positive prediction
    no longer counts, so true positives there are lost to recall.
    """
    if len(records) != len(assignments):
        raise LengthMismatch(f"{len(records)} records but {len(assignments)} assignments")
    tp = fp = actual = kept_tp = kept_fp = 0
    per_tp: dict[int, int] = {}
    per_fp: dict[int, int] = {}
    for rec, c in zip(records, assignments):
        c = int(c)
        per_tp.setdefault(c, 0)
        per_fp.setdefault(c, 0)
        truth = rec.true_label == "pos"
        actual += truth
        if rec.predicted_label != "pos":
            continue
        kept = c not in decision.gated
        if truth:
            tp += 1
            per_tp[c] += 1
            kept_tp += kept
        else:
            fp += 1
            per_fp[c] += 1
            kept_fp += kept

    base_p = _ratio(tp, tp + fp)
    gated_p = _ratio(kept_tp, kept_tp + kept_fp)
    base_r = _ratio(tp, actual)
    gated_r = _ratio(kept_tp, actual)
    return ProductionMetrics(
        baseline_precision=base_p,
        gated_precision=gated_p,
        baseline_recall=base_r,
        gated_recall=gated_r,
        precision_delta=None if base_p is None or gated_p is None else gated_p - base_p,
        recall_delta=None if base_r is None else gated_r - base_r,
        per_cluster_precision={c: _ratio(per_tp[c], per_tp[c] + per_fp[c]) for c in sorted(per_tp)},
        per_cluster_recall_contribution={c: (_ratio(per_tp[c], actual) or 0.0) for c in sorted(per_tp)},
        counts={
            "records": len(records),
            "positive_predictions": tp + fp,
            "true_positives": tp,
            "false_positives": fp,
            "actual_positives": actual,
            "kept_true_positives": kept_tp,
            "kept_false_positives": kept_fp,
        },
    )


def annotate_reports(reports, decision: GateDecision, metrics: ProductionMetrics) -> None:
    """Copy gate flags and per-cluster precision/recall into ``reports`` in place."""
    for r in reports:
        r.gated = r.cluster_id in decision.gated
        r.precision = metrics.per_cluster_precision.get(r.cluster_id)
        r.recall_contribution = metrics.per_cluster_recall_contribution.get(r.cluster_id, 0.0)
