"""Figure rendering for the CLI report outputs.

Each renderer writes one PNG next to the delimited output it
illustrates. matplotlib loads lazily with the Agg backend so headless
runs and --no-figures paths never pay for it.
"""

from __future__ import annotations

from pathlib import Path


def _plt():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def render_trace(path, trace, title: str = "objective trace") -> Path:
    """Best objective value per iteration for one training run."""
    plt = _plt()
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.plot(range(1, len(trace) + 1), trace, lw=1.5)
    ax.set_xlabel("iteration")
    ax.set_ylabel("best objective")
    ax.set_title(title)
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def render_eval(path, rows) -> Path:
    """Per-run test AUC scatter with a mean bar per variant.

    rows are dicts with keys variant, run, test_auc (None for runs that
    failed).
    """
    plt = _plt()
    variants = []
    for row in rows:
        if row["variant"] not in variants:
            variants.append(row["variant"])
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for i, variant in enumerate(variants):
        vals = [r["test_auc"] for r in rows
                if r["variant"] == variant and r["test_auc"] is not None]
        xs = [i + 1] * len(vals)
        ax.plot(xs, vals, "o", alpha=0.45, ms=5)
        if vals:
            mean = sum(vals) / len(vals)
            ax.hlines(mean, i + 0.75, i + 1.25, colors="k", lw=2)
    ax.set_xticks(range(1, len(variants) + 1))
    ax.set_xticklabels(variants)
    ax.set_ylabel("test macro AUC")
    ax.set_title("per-run test AUC by variant")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def render_imbalance(path, rows) -> Path:
    """Mean test AUC against the minority training fraction r, one line
    per variant. rows carry variant, r, mean_test_auc."""
    plt = _plt()
    variants = []
    for row in rows:
        if row["variant"] not in variants:
            variants.append(row["variant"])
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    for variant in variants:
        pts = sorted((r["r"], r["mean_test_auc"]) for r in rows
                     if r["variant"] == variant)
        ax.plot([p[0] for p in pts], [p[1] for p in pts],
                marker="o", label=variant)
    ax.set_xlabel("minority training fraction r")
    ax.set_ylabel("mean test AUC")
    ax.set_ylim(0.0, 1.05)
    ax.set_title("imbalance sensitivity")
    ax.legend()
    ax.grid(True, alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)


def render_bench(path, rows) -> Path:
    """Milliseconds per iteration for each optimizer."""
    plt = _plt()
    methods = [r["method"] for r in rows]
    values = [r["ms_per_iter"] for r in rows]
    fig, ax = plt.subplots(figsize=(6.4, 4.0))
    ax.bar(methods, values)
    ax.set_ylabel("ms per iteration")
    ax.set_title("optimizer iteration cost")
    ax.grid(True, axis="y", alpha=0.3)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return Path(path)
