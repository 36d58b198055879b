"""Report figures, rendered to files with the non-interactive backend."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_bleu_report(report, path, title="BLEU report"):
    fig, ax = plt.subplots(figsize=(5, 3.2))
    labels = ["p1", "p2", "p3", "p4", "BP", "BLEU"]
    values = list(report["precisions"]) + [report["brevity_penalty"], report["bleu"]]
    ax.bar(labels, values, color=["#4c72b0"] * 4 + ["#999999", "#c44e52"])
    ax.set_ylim(0, 1.05)
    ax.set_title(title)
    for x, v in enumerate(values):
        ax.text(x, v + 0.02, f"{v:.3f}", ha="center", fontsize=8)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)


def plot_loss_history(losses, path, title="Unsupervised loss by half-round"):
    """``losses`` is a list of LossBreakdown, the first one before any tuning."""
    fig, ax = plt.subplots(figsize=(5.5, 3.4))
    xs = list(range(len(losses)))
    bottom = [0.0] * len(losses)
    for name in ("l_cycle_e", "l_cycle_f", "l_lm_e", "l_lm_f"):
        vals = [getattr(b, name) for b in losses]
        ax.bar(xs, vals, bottom=bottom, label=name)
        bottom = [a + b for a, b in zip(bottom, vals)]
    ax.plot(xs, [b.total for b in losses], "k.-", label="total")
    ax.set_xlabel("half-round")
    ax.set_ylabel("loss")
    ax.set_xticks(xs)
    ax.set_title(title)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
