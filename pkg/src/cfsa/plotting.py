"""Report figures: trade-off baselines with the mitigated point, and weight sweeps."""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402

REGION_COLORS = {
    "win_win": "#1b9e77",
    "good": "#66a61e",
    "inverted": "#7570b3",
    "poor": "#e6ab02",
    "lose_lose": "#d95f02",
    None: "#999999",
}

STYLE = {
    "font.size": 8,
    "axes.titlesize": 8,
    "axes.labelsize": 8,
    "legend.fontsize": 7,
    "xtick.labelsize": 7,
    "ytick.labelsize": 7,
    "axes.spines.top": False,
    "axes.spines.right": False,
}


def plot_tradeoffs(baselines: dict, cells: list[dict], attribute: str, path) -> None:
    """Grid of fairness (rows) x performance (columns) panels for one attribute."""
    fair = sorted({f for f, _ in baselines}, key=[f for f, _ in baselines].index)
    perf = sorted({p for _, p in baselines}, key=[p for _, p in baselines].index)
    by_key = {(c["fairness_metric"], c["performance_metric"]): c
              for c in cells if c["attribute"] == attribute}
    with plt.rc_context(STYLE):
        fig, axes = plt.subplots(len(fair), len(perf), figsize=(2.2 * len(perf), 2.0 * len(fair)),
                                 squeeze=False)
        for i, f in enumerate(fair):
            for j, p in enumerate(perf):
                ax = axes[i][j]
                base = baselines[(f, p)]
                xs = [b for b, _ in base.points]
                ys = [q for _, q in base.points]
                ax.plot(xs, ys, "-o", color="0.4", ms=2.5, lw=1, label="baseline")
                ax.plot(xs[0], ys[0], "s", color="k", ms=4, label="original")
                cell = by_key.get((f, p))
                if cell and cell.get("bias") is not None:
                    ax.plot(cell["bias"], cell["performance"], "*", ms=9,
                            color=REGION_COLORS.get(cell["region"]), label=cell["region"])
                    ax.set_title(f"{cell['region']}", color=REGION_COLORS.get(cell["region"]))
                if i == len(fair) - 1:
                    ax.set_xlabel(f.upper())
                if j == 0:
                    ax.set_ylabel(p)
                elif i == 0 and j == len(perf) - 1:
                    ax.legend(loc="lower right", frameon=False)
        fig.suptitle(f"trade-off baselines, sensitive attribute: {attribute}")
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)


def plot_sweep(rows: list[dict], path) -> None:
    with plt.rc_context(STYLE):
        fig, ax = plt.subplots(figsize=(4.0, 2.6))
        w = [r["fairness_weight"] for r in rows]
        ax.plot(w, [r["beat_proportion"] or 0.0 for r in rows], "-o", color="#1b9e77", ms=3)
        ax.set_xlabel("fairness-model weight")
        ax.set_ylabel("share of cells beating baseline")
        ax.set_ylim(-0.02, 1.02)
        fig.tight_layout()
        fig.savefig(path, dpi=120)
        plt.close(fig)
