"""Command-line driver.

Every subcommand works inside the ``--out`` directory: it reads the products
of earlier stages from there, writes its own, and prints a one-line JSON
summary on stdout. Exit status is 0 on success, 1 on a data error and 2 on a
usage error.

Stage products::

    gen       manifest.jsonl, images/, saliency/
    sca       sca.csv
    embed     embeddings.csv
    cluster   cluster_model.json
    sweep     sweep.csv
    assign    assignments.csv
    evaluate  clusters.json
    gate      gate.json
    report    report.json, records.csv, kde.svg, boxplot.svg, precision.svg
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import sys
from pathlib import Path

from . import figures
from .cluster import kmeans_fit, load_model, save_model, sweep_k
from .core import load_manifest
from .embed import load_embeddings, save_embeddings
from .errors import AberrantError, InvalidConfig
from .evaluate import (
    ClusterReport,
    GateDecision,
    annotate_reports,
    cluster_aberrancy,
    gate_clusters,
    production_metrics,
)
from .saliency import CropConfig
from .sca import ScaConfig
from .syngen import GenConfig, generate_corpus
from .workflow import align_embeddings, assign_records, embed_records, manifest_root, score_records

log = logging.getLogger("aberrant")

COMMANDS = ("gen", "sca", "embed", "cluster", "sweep", "assign", "evaluate", "gate", "report", "pipeline")
SUMMARIES = {
    "gen": "write a synthetic corpus and manifest.jsonl",
    "sca": "score saliency crops against truth boxes (sca.csv)",
    "embed": "embed saliency crop stacks (embeddings.csv)",
    "cluster": "fit k-means on the training split (cluster_model.json)",
    "sweep": "silhouette/ARI over a range of k (sweep.csv)",
    "assign": "assign every record to a cluster (assignments.csv)",
    "evaluate": "per-cluster SCA distributions and rates (clusters.json)",
    "gate": "select clusters to exclude (gate.json)",
    "report": "production metrics, CSV export and figures",
    "pipeline": "run gen through report in one go",
}
FORMATS = ("csv", "json", "svg")


class UsageError(Exception):
    pass


def _k_range(text: str) -> tuple[int, int]:
    try:
        lo, hi = (int(v) for v in text.split(":"))
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected MIN:MAX, got {text!r}") from None
    if lo > hi:
        raise argparse.ArgumentTypeError(f"empty k range {text!r}")
    return lo, hi


def _formats(text: str) -> tuple[str, ...]:
    items = tuple(f.strip() for f in text.split(",") if f.strip())
    bad = [f for f in items if f not in FORMATS]
    if bad:
        raise argparse.ArgumentTypeError(f"unknown format(s) {bad}; choose from {FORMATS}")
    return items


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--manifest", type=Path, help="record manifest (default: OUT/manifest.jsonl)")
    common.add_argument("--out", type=Path, default=Path("out"), help="working/output directory")
    common.add_argument("--seed", type=int, default=42)
    common.add_argument("--k", type=int, default=6, help="number of clusters")
    common.add_argument("--knn", type=int, default=5, help="neighbours voting in KNN assignment")
    common.add_argument("--tau", type=float, default=0.1, help="SCA aberrancy threshold")
    common.add_argument("--rho", type=float, default=0.2, help="cluster gating rate threshold")
    common.add_argument("--theta", type=float, default=0.5, help="saliency threshold fraction")
    common.add_argument("--cap", type=float, default=0.1, help="SCA cap for disjoint boxes")
    common.add_argument("--stack-size", type=int, default=32)
    common.add_argument("--k-range", type=_k_range, default=(2, 10), help="sweep range MIN:MAX")
    common.add_argument("--format", type=_formats, default=("csv", "json"), help="report formats")
    common.add_argument("--n-per-class", type=int, default=100, help="synthetic records per class")
    common.add_argument("--embeddings", type=Path, help="external embeddings CSV (default: OUT/embeddings.csv)")

    parser = argparse.ArgumentParser(prog="aberrant", description="Detect and gate aberrant predictions.")
    sub = parser.add_subparsers(dest="command", required=True, metavar="COMMAND")
    for name in COMMANDS:
        sub.add_parser(name, parents=[common], help=SUMMARIES[name])
    return parser


def _configs(args):
    try:
        sca_cfg = ScaConfig(no_overlap_cap=args.cap, aberrancy_threshold=args.tau)
        crop_cfg = CropConfig(threshold_fraction=args.theta, stack_size=args.stack_size)
    except ValueError as exc:
        raise UsageError(str(exc)) from None
    if args.k < 1 or args.knn < 1:
        raise UsageError("--k and --knn must be positive")
    if not (0.0 <= args.rho <= 1.0):
        raise UsageError(f"--rho must lie in [0, 1], got {args.rho}")
    return sca_cfg, crop_cfg


def _manifest_path(args) -> Path:
    return args.manifest if args.manifest is not None else args.out / "manifest.jsonl"


def _embeddings_path(args) -> Path:
    return args.embeddings if args.embeddings is not None else args.out / "embeddings.csv"


def _write_csv(path: Path, header, rows) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(header)
        writer.writerows(rows)


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=1, sort_keys=True) + "\n", encoding="utf-8")


def _read_json(path: Path):
    try:
        return json.loads(path.read_text(encoding="utf-8"))
    except FileNotFoundError:
        raise AberrantError(f"{path} not found; run the producing stage first") from None


def _fmt(value) -> str:
    return "" if value is None else repr(float(value))


def _train_split(records, vectors):
    train = [r for r in records if r.split == "train"]
    if not train:
        raise AberrantError("manifest has no training records")
    return train, align_embeddings(train, vectors)


def cmd_gen(args) -> dict:
    cfg = GenConfig(n_per_class=args.n_per_class, seed=args.seed)
    try:
        cfg.validate()
    except InvalidConfig as exc:
        raise UsageError(str(exc)) from None
    summary = generate_corpus(cfg, args.out)
    summary["manifest"] = "manifest.jsonl"
    return summary


def cmd_sca(args) -> dict:
    sca_cfg, crop_cfg = _configs(args)
    path = _manifest_path(args)
    records = load_manifest(path)
    rows, skipped = score_records(records, manifest_root(path), crop_cfg, sca_cfg)
    tau = sca_cfg.aberrancy_threshold
    _write_csv(
        args.out / "sca.csv",
        ["id", "crop_x0", "crop_y0", "crop_x1", "crop_y1", "sca", "aberrant"],
        [[rec.id, *(_fmt(v) for v in box.as_list()), _fmt(value), int(value < tau)] for rec, box, value in rows],
    )
    warnings = sum(skipped.values())
    if warnings:
        log.warning("skipped %d record(s): %s", warnings, skipped)
    return {
        "command": "sca",
        "scored": len(rows),
        "aberrant": sum(value < tau for _, _, value in rows),
        "warnings": warnings,
        "skipped": skipped,
    }


def cmd_embed(args) -> dict:
    _, crop_cfg = _configs(args)
    path = _manifest_path(args)
    records = load_manifest(path)
    vectors = embed_records(records, manifest_root(path), crop_cfg)
    save_embeddings(vectors, args.out / "embeddings.csv")
    return {"command": "embed", "records": len(vectors), "degenerate": sum(v.degenerate for v in vectors)}


def cmd_cluster(args) -> dict:
    _configs(args)
    records = load_manifest(_manifest_path(args))
    train, X = _train_split(records, load_embeddings(_embeddings_path(args)))
    model = kmeans_fit(X, args.k, args.seed, ids=[r.id for r in train])
    save_model(model, args.out / "cluster_model.json")
    sizes = [int((model.train_assignments == c).sum()) for c in range(model.k)]
    return {"command": "cluster", "k": model.k, "train": len(train), "inertia": model.inertia, "sizes": sizes}


def cmd_sweep(args) -> dict:
    _configs(args)
    records = load_manifest(_manifest_path(args))
    train, X = _train_split(records, load_embeddings(_embeddings_path(args)))
    tags = [r.class_tag for r in train]
    reference = tags if all(t is not None for t in tags) else None
    lo, hi = args.k_range
    if lo < 2 or hi > len(train) - 1:
        raise UsageError(f"--k-range must lie within 2:{len(train) - 1}")
    rows = sweep_k(X, (lo, hi), args.seed, reference)
    _write_csv(
        args.out / "sweep.csv",
        ["k", "silhouette", "ari_vs_reference", "inertia"],
        [[r.k, _fmt(r.silhouette), _fmt(r.ari_vs_reference), _fmt(r.inertia)] for r in rows],
    )
    best = max(rows, key=lambda r: r.silhouette)
    return {"command": "sweep", "rows": len(rows), "best_silhouette_k": best.k}


def cmd_assign(args) -> dict:
    _configs(args)
    records = load_manifest(_manifest_path(args))
    model = load_model(args.out / "cluster_model.json")
    if args.knn > len(model.train_ids):
        raise UsageError(f"--knn exceeds the {len(model.train_ids)} training points")
    rows = assign_records(model, records, load_embeddings(_embeddings_path(args)), args.knn)
    _write_csv(args.out / "assignments.csv", ["id", "cluster", "source"], rows)
    return {
        "command": "assign",
        "records": len(rows),
        "knn_assigned": sum(src == "knn" for _, _, src in rows),
    }


def _read_assignments(args, records) -> list[int]:
    path = args.out / "assignments.csv"
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            by_id = {row["id"]: int(row["cluster"]) for row in csv.DictReader(fh)}
    except FileNotFoundError:
        raise AberrantError(f"{path} not found; run assign first") from None
    missing = [r.id for r in records if r.id not in by_id]
    if missing:
        raise AberrantError(f"no cluster assignment for record {missing[0]!r}")
    return [by_id[r.id] for r in records]


def cmd_evaluate(args) -> dict:
    sca_cfg, crop_cfg = _configs(args)
    path = _manifest_path(args)
    records = load_manifest(path)
    assignments = _read_assignments(args, records)
    model = load_model(args.out / "cluster_model.json")
    rows, skipped = score_records(records, manifest_root(path), crop_cfg, sca_cfg)
    by_id = {rec.id: value for rec, _, value in rows}
    values = [by_id.get(r.id) for r in records]
    reports = cluster_aberrancy(records, values, assignments, sca_cfg.aberrancy_threshold, range(model.k))
    _write_json(
        args.out / "clusters.json",
        {
            "tau": sca_cfg.aberrancy_threshold,
            "records": [
                {"id": r.id, "cluster": c, "sca": v} for r, c, v in zip(records, assignments, values)
            ],
            "clusters": [r.to_dict() for r in reports],
        },
    )
    return {
        "command": "evaluate",
        "clusters": len(reports),
        "scored": len(rows),
        "skipped": skipped,
        "aberrancy_rates": {str(r.cluster_id): r.aberrancy_rate for r in reports},
    }


def cmd_gate(args) -> dict:
    _configs(args)
    doc = _read_json(args.out / "clusters.json")
    reports = [ClusterReport.from_dict(c) for c in doc["clusters"]]
    decision = gate_clusters(reports, args.rho)
    _write_json(args.out / "gate.json", decision.to_dict())
    return {"command": "gate", **decision.to_dict()}


def cmd_report(args) -> dict:
    sca_cfg, _ = _configs(args)
    records = load_manifest(_manifest_path(args))
    doc = _read_json(args.out / "clusters.json")
    decision = GateDecision.from_dict(_read_json(args.out / "gate.json"))
    reports = [ClusterReport.from_dict(c) for c in doc["clusters"]]
    assignments = _read_assignments(args, records)
    metrics = production_metrics(records, assignments, decision)
    annotate_reports(reports, decision, metrics)
    tau = doc["tau"]
    written = []

    if "json" in args.format:
        _write_json(
            args.out / "report.json",
            {
                "config": {"tau": tau, "rho": decision.rate_threshold, "cap": sca_cfg.no_overlap_cap},
                "clusters": [r.to_dict() for r in reports],
                "gate": decision.to_dict(),
                "production": metrics.to_dict(),
            },
        )
        written.append("report.json")
    if "csv" in args.format:
        rows = []
        for item in doc["records"]:
            value = item["sca"]
            aberrant = "" if value is None else int(value < tau)
            rows.append([item["id"], item["cluster"], _fmt(value), aberrant, int(item["cluster"] not in decision.gated)])
        _write_csv(args.out / "records.csv", ["id", "cluster", "sca", "aberrant", "kept"], rows)
        written.append("records.csv")
    if "svg" in args.format:
        figures.plot_kde(reports, args.out / "kde.svg", tau)
        figures.plot_boxes(reports, args.out / "boxplot.svg")
        figures.plot_precision(reports, metrics.baseline_precision, args.out / "precision.svg")
        written += ["kde.svg", "boxplot.svg", "precision.svg"]

    return {
        "command": "report",
        "written": written,
        "gated": sorted(decision.gated),
        "baseline_precision": metrics.baseline_precision,
        "gated_precision": metrics.gated_precision,
        "recall_delta": metrics.recall_delta,
    }


def cmd_pipeline(args) -> dict:
    """Run gen (unless ``--manifest`` is given) then every stage up to report."""
    stages = [cmd_embed, cmd_cluster, cmd_assign, cmd_evaluate, cmd_gate, cmd_report]
    if args.manifest is None:
        stages.insert(0, cmd_gen)
    summaries = {}
    for stage in stages:
        summary = stage(args)
        summaries[stage.__name__[4:]] = summary
    report = summaries["report"]
    return {"command": "pipeline", "stages": list(summaries), **{k: v for k, v in report.items() if k != "command"}}


HANDLERS = {name: globals()[f"cmd_{name}"] for name in COMMANDS}


def main(argv=None) -> int:
    logging.basicConfig(level=logging.WARNING, format="%(levelname)s: %(message)s", stream=sys.stderr)
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code
    try:
        args.out.mkdir(parents=True, exist_ok=True)
        summary = HANDLERS[args.command](args)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"{parser.prog}: error: {exc}", file=sys.stderr)
        return 2
    except (AberrantError, ValueError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(json.dumps(summary, sort_keys=True))
    return 0


if __name__ == "__main__":
    sys.exit(main())
