"""Exit criteria for the package, one test per criterion.

Each test logs a PASS/FAIL line that is repeated in the pytest terminal
summary. Run alone with ``pytest tests/test_acceptance.py -v``.
"""

import csv
import json
import math
import shutil
import time
from collections import Counter

import numpy as np
import pytest

from aberrant.cli import main
from aberrant.cluster import ari, kmeans_fit, silhouette
from aberrant.core import Box2D, load_manifest
from aberrant.evaluate import DensityCurve, gate_clusters, kde
from aberrant.sca import iou, sca
from aberrant.syngen import CLASS_TAGS, GenConfig
from oracles import ari_pairs, best_wcss, silhouette_loop
from test_sca import raster_iou

pytestmark = pytest.mark.acceptance

PIPELINE_FLAGS = ["--seed", "42", "--k", "6", "--tau", "0.1", "--rho", "0.2"]


@pytest.fixture(scope="session")
def default_run(tmp_path_factory):
    out = tmp_path_factory.mktemp("default_pipeline")
    start = time.perf_counter()
    code = main(["pipeline", "--out", str(out), *PIPELINE_FLAGS])
    elapsed = time.perf_counter() - start
    return out, code, elapsed


def _random_int_box(rng, size=64):
    x0, x1 = sorted(rng.choice(size + 1, 2, replace=False))
    y0, y1 = sorted(rng.choice(size + 1, 2, replace=False))
    return Box2D(float(x0), float(y0), float(x1), float(y1))


def test_1_metric_oracle_equivalence(acceptance_log):
    rng = np.random.default_rng(1)
    start = time.perf_counter()
    mismatches = 0
    overlap_mismatches = 0
    for _ in range(1000):
        a, b = _random_int_box(rng), _random_int_box(rng)
        value = iou(a, b)
        mismatches += value != raster_iou(a, b)
        if value > 0:
            overlap_mismatches += sca(a, b) != value
    elapsed = time.perf_counter() - start
    passed = mismatches == 0 and overlap_mismatches == 0 and elapsed < 5.0
    acceptance_log("1 metric oracle equivalence", passed, f"iou mismatches={mismatches} sca!=iou={overlap_mismatches} t={elapsed:.2f}s")
    assert passed


def _disjoint_pair(rng):
    while True:
        truth = Box2D(*_corners(rng))
        pred = Box2D(*_corners(rng))
        if iou(pred, truth) == 0.0 and pred.center != truth.center:
            return pred, truth


def _corners(rng):
    # offset keeps every shifted box in the non-negative quadrant
    x0, y0 = rng.uniform(300, 380, 2)
    w, h = rng.uniform(1, 20, 2)
    return x0, y0, x0 + w, y0 + h


def _shift(box, dx, dy):
    return Box2D(box.x0 + dx, box.y0 + dy, box.x1 + dx, box.y1 + dy)


def test_2_sca_decay_properties(acceptance_log):
    rng = np.random.default_rng(2)
    violations = []
    checked = skipped = 0
    for i in range(200):
        pred, truth = _disjoint_pair(rng)
        (px, py), (tx, ty) = pred.center, truth.center
        d = math.hypot(px - tx, py - ty)
        rays = [((px - tx) / d, (py - ty) / d)]
        # the axis along which the pair is separated also moves the boxes apart
        if pred.x0 >= truth.x1:
            rays.append((1.0, 0.0))
        elif pred.x1 <= truth.x0:
            rays.append((-1.0, 0.0))
        elif pred.y0 >= truth.y1:
            rays.append((0.0, 1.0))
        else:
            rays.append((0.0, -1.0))
        while len(rays) < 6:
            # random directions that increase the centroid distance
            angle = rng.uniform(0, 2 * math.pi)
            ux, uy = math.cos(angle), math.sin(angle)
            if ux * (px - tx) + uy * (py - ty) > 0:
                rays.append((ux, uy))
        for ux, uy in rays:
            path = [_shift(pred, t * ux, t * uy) for t in np.linspace(0, 200, 41)]
            if any(iou(p, truth) > 0 for p in path):
                skipped += 1
                continue
            scores = [sca(p, truth) for p in path]
            checked += 1
            if not all(b < a for a, b in zip(scores, scores[1:])):
                violations.append(("decay", i))
        base = sca(pred, truth)
        tx_, ty_ = rng.uniform(0, 500, 2)
        if abs(sca(_shift(pred, tx_, ty_), _shift(truth, tx_, ty_)) - base) > 1e-9:
            violations.append(("translation", i))
        s = rng.uniform(0.1, 10)
        scaled = lambda b: Box2D(b.x0 * s, b.y0 * s, b.x1 * s, b.y1 * s)
        if abs(sca(scaled(pred), scaled(truth)) - base) > 1e-9:
            violations.append(("scale", i))
    passed = not violations
    acceptance_log("2 SCA decay properties", passed, f"rays checked={checked} skipped(overlap)={skipped} violations={violations[:5]}")
    assert passed


def _random_partition(rng, n):
    return rng.integers(0, rng.integers(1, n + 1), n).tolist()


def test_3_clustering_oracles(acceptance_log):
    rng = np.random.default_rng(3)
    ari_errors = 0
    for _ in range(500):
        n = int(rng.integers(2, 9))
        a, b = _random_partition(rng, n), _random_partition(rng, n)
        ari_errors += abs(ari(a, b) - ari_pairs(a, b)) > 1e-12

    sil_errors = 0
    for _ in range(100):
        n = int(rng.integers(3, 20))
        X = rng.normal(size=(n, int(rng.integers(1, 4))))
        labels = rng.integers(0, 4, n)
        while len(set(labels.tolist())) < 2:
            labels = rng.integers(0, 4, n)
        sil_errors += abs(silhouette(X, labels) - silhouette_loop(X.tolist(), labels.tolist())) > 1e-9

    four = [(0.0, 0.0), (0.0, 1.0), (10.0, 0.0), (10.0, 1.0)]
    optimum, centers = best_wcss(four, 2)
    model = kmeans_fit(np.array(four), 2, seed=42)
    kmeans_ok = (
        sorted(map(tuple, model.centroids.tolist())) == centers and abs(model.inertia - optimum) < 1e-12
    )
    passed = ari_errors == 0 and sil_errors == 0 and kmeans_ok
    acceptance_log(
        "3 clustering oracles", passed, f"ari errors={ari_errors}/500 silhouette errors={sil_errors}/100 kmeans={kmeans_ok}"
    )
    assert passed


def test_4_kde_normalization(default_run, acceptance_log):
    out, code, _ = default_run
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    curves = [DensityCurve.from_dict(c["density"]) for c in report["clusters"] if c["density"] is not None]
    integrals = [c.integral() for c in curves]
    normalized = bool(curves) and all(0.98 <= v <= 1.02 for v in integrals)

    rng = np.random.default_rng(4)
    max_asym = 0.0
    for _ in range(20):
        half = rng.uniform(0, 0.5, int(rng.integers(1, 30)))
        curve = kde(np.concatenate([0.5 - half, 0.5 + half]))
        # the default grid is symmetric about 0.5
        max_asym = max(max_asym, float(np.max(np.abs(curve.density - curve.density[::-1]))))
    passed = normalized and max_asym <= 1e-9
    acceptance_log(
        "4 KDE normalization",
        passed,
        f"curves={len(curves)} integrals=[{min(integrals):.4f}, {max(integrals):.4f}] max asymmetry={max_asym:.2e}",
    )
    assert passed


def test_5_end_to_end_reproduction(default_run, acceptance_log):
    out, code, elapsed = default_run
    assert code == 0
    report = json.loads((out / "report.json").read_text())
    records = load_manifest(out / "manifest.jsonl")
    tags = {r.id: r.class_tag for r in records}
    with open(out / "assignments.csv", newline="") as fh:
        assignment = {row["id"]: int(row["cluster"]) for row in csv.DictReader(fh)}

    rates = GenConfig().aberrancy_rate_per_class
    high = {CLASS_TAGS[i] for i in sorted(range(len(rates)), key=lambda i: rates[i])[-2:]}
    gated = report["gate"]["gated"]
    dominant = {}
    for c in gated:
        members = Counter(tags[rid] for rid, cl in assignment.items() if cl == c)
        tag, count = members.most_common(1)[0]
        dominant[c] = (tag, count / sum(members.values()))
    crit_a = len(gated) == 2 and {t for t, share in dominant.values() if share > 0.5} == high

    prod = report["production"]
    gain = prod["gated_precision"] - prod["baseline_precision"]
    crit_b = gain >= 0.10
    crit_c = prod["recall_delta"] >= -0.15
    ids = [r.id for r in records]
    score = ari([tags[i] for i in ids], [assignment[i] for i in ids])
    crit_d = score >= 0.6
    crit_t = elapsed < 60.0
    passed = crit_a and crit_b and crit_c and crit_d and crit_t
    acceptance_log(
        "5 end-to-end reproduction",
        passed,
        f"(a) gated={gated} dominant={dominant} "
        f"(b) precision {prod['baseline_precision']:.3f}->{prod['gated_precision']:.3f} (+{gain * 100:.1f} pp) "
        f"(c) recall delta {prod['recall_delta'] * 100:.1f} pp (d) ARI={score:.3f} t={elapsed:.1f}s",
    )
    assert passed


def test_6_gate_set_from_reported_rates(acceptance_log):
    # cluster 4: 81%, cluster 1: 25%, clusters 2 and 5 below 5%, cluster 3 below 1%, cluster 0 none
    rates = {0: 0.0, 1: 0.25, 2: 0.05, 3: 0.0099, 4: 0.81, 5: 0.05}
    decision = gate_clusters(rates, 0.2)
    passed = decision.gated == {1, 4}
    acceptance_log("6 gate set from reported rates", passed, f"gated={sorted(decision.gated)}")
    assert passed


def test_7_determinism(tmp_path, acceptance_log):
    out = tmp_path / "run"
    assert main(["pipeline", "--out", str(out), *PIPELINE_FLAGS]) == 0
    first = tmp_path / "first"
    shutil.move(str(out), first)
    assert main(["pipeline", "--out", str(out), *PIPELINE_FLAGS]) == 0
    names = sorted(p.name for p in first.iterdir() if p.suffix in (".json", ".csv", ".jsonl"))
    differing = [n for n in names if (first / n).read_bytes() != (out / n).read_bytes()]
    passed = bool(names) and not differing
    acceptance_log("7 determinism", passed, f"compared={names} differing={differing}")
    assert passed
