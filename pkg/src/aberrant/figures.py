"""Static SVG figures: per-cluster SCA densities, box plots and precision bars."""

from __future__ import annotations

from pathlib import Path


def _pyplot():
    import matplotlib

    matplotlib.use("Agg")
    matplotlib.rcParams["svg.hashsalt"] = "aberrant"
    import matplotlib.pyplot as plt

    return plt


def _save(fig, path: Path) -> None:
    fig.savefig(path, format="svg", metadata={"Date": None})


def plot_kde(reports, path, tau: float | None = None) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    for r in reports:
        if r.density is not None:
            ax.plot(r.density.grid, r.density.density, label=f"cluster {r.cluster_id}")
    if tau is not None:
        ax.axvline(tau, color="grey", linestyle="--", linewidth=0.8)
    ax.set_xlabel("saliency crop accuracy")
    ax.set_ylabel("density")
    ax.legend(fontsize="small")
    fig.tight_layout()
    _save(fig, Path(path))
    plt.close(fig)


def plot_boxes(reports, path) -> None:
    plt = _pyplot()
    scored = [r for r in reports if r.box is not None]
    fig, ax = plt.subplots(figsize=(6, 4))
    stats = [
        {
            "label": str(r.cluster_id),
            "whislo": r.box.whisker_low,
            "q1": r.box.q1,
            "med": r.box.median,
            "q3": r.box.q3,
            "whishi": r.box.whisker_high,
            "fliers": list(r.box.outliers),
        }
        for r in scored
    ]
    if stats:
        ax.bxp(stats, showfliers=True)
    ax.set_xlabel("cluster")
    ax.set_ylabel("saliency crop accuracy")
    fig.tight_layout()
    _save(fig, Path(path))
    plt.close(fig)


def plot_precision(reports, baseline: float | None, path) -> None:
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    ids = [r.cluster_id for r in reports]
    values = [r.precision or 0.0 for r in reports]
    colors = ["tab:red" if r.gated else "tab:blue" for r in reports]
    ax.bar([str(c) for c in ids], values, color=colors)
    if baseline is not None:
        ax.axhline(baseline, color="black", linestyle="--", linewidth=0.8, label="ungated precision")
        ax.legend(fontsize="small")
    ax.set_ylim(0, 1.05)
    ax.set_xlabel("cluster (red: gated)")
    ax.set_ylabel("precision")
    fig.tight_layout()
    _save(fig, Path(path))
    plt.close(fig)
