"""Figure rendering for training runs and budget sweeps.

Figures are written next to the delimited metrics output; the metrics files
stay the canonical record, the figures are the human-readable report.
"""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt


def save_training_curves(records, out_dir, stem="training"):
    """Accuracy and clause-size curves per epoch; returns written paths."""
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    splits = sorted({r.split for r in records})

    fig, ax = plt.subplots(figsize=(6, 4))
    for split in splits:
        rows = [r for r in records if r.split == split]
        ax.plot([r.epoch for r in rows], [r.accuracy for r in rows], label=split)
    ax.set_xlabel("epoch")
    ax.set_ylabel("accuracy")
    ax.set_ylim(0, 1.02)
    ax.grid(True, alpha=0.3)
    ax.legend()
    acc_path = out_dir / f"{stem}_accuracy.png"
    fig.tight_layout()
    fig.savefig(acc_path, dpi=120)
    plt.close(fig)

    rows = [r for r in records if r.split == splits[0]]
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(6, 5), sharex=True)
    ax1.plot([r.epoch for r in rows], [r.avg_literals_per_clause for r in rows])
    ax1.set_ylabel("avg literals / clause")
    ax1.grid(True, alpha=0.3)
    ax2.plot([r.epoch for r in rows], [r.over_budget_fraction for r in rows])
    ax2.set_ylabel("over-budget fraction")
    ax2.set_xlabel("epoch")
    ax2.grid(True, alpha=0.3)
    size_path = out_dir / f"{stem}_clause_size.png"
    fig.tight_layout()
    fig.savefig(size_path, dpi=120)
    plt.close(fig)
    return [acc_path, size_path]


def save_sweep_figures(rows, out_dir, stem="sweep"):
    """Budget-vs-accuracy and budget-vs-l_ave figures for sweep rows.

    `rows` are dicts with keys budget ("all" or int), accuracy, l_ave.
    """
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    labels = [str(r["budget"]) for r in rows]
    xs = range(len(rows))

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, [r["accuracy"] for r in rows], marker="o")
    ax.set_xticks(list(xs), labels)
    ax.set_xlabel("literal budget")
    ax.set_ylabel("worst max accuracy")
    ax.grid(True, alpha=0.3)
    acc_path = out_dir / f"{stem}_accuracy.png"
    fig.tight_layout()
    fig.savefig(acc_path, dpi=120)
    plt.close(fig)

    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(xs, [r["l_ave"] for r in rows], marker="s", color="tab:orange")
    ax.set_xticks(list(xs), labels)
    ax.set_xlabel("literal budget")
    ax.set_ylabel("avg literals / clause")
    ax.grid(True, alpha=0.3)
    lave_path = out_dir / f"{stem}_literals.png"
    fig.tight_layout()
    fig.savefig(lave_path, dpi=120)
    plt.close(fig)
    return [acc_path, lave_path]
