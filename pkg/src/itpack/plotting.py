"""Figures rendered from trace rows (headless)."""

from __future__ import annotations

from pathlib import Path
from typing import Sequence

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def plot_trace(rows: Sequence[dict], path: str | Path, title: str | None = None) -> Path:
    """Candidate-set sizes against the scheduled band, and active transversals, per iteration.

    The x axis counts iterations across all rounds; round boundaries are
    drawn as thin vertical lines.
    """
    path = Path(path)
    x = list(range(len(rows)))
    f = lambda key: [float(r[key]) for r in rows]  # noqa: E731
    fig, (top, bottom) = plt.subplots(2, 1, figsize=(8, 6), sharex=True, constrained_layout=True)
    if rows:
        top.fill_between(x, f("S_minus"), f("S_plus"), color="tab:blue", alpha=0.25, label="scheduled band")
        top.plot(x, f("min_candidate"), color="tab:red", lw=1, label="min candidate set")
        top.plot(x, f("max_candidate"), color="tab:green", lw=1, label="max candidate set")
        top.plot(x, f("D"), color="gray", lw=1, ls="--", label="degree bound")
        bottom.step(x, f("active_transversals"), where="post", color="black", lw=1)
        starts = [i for i, r in enumerate(rows) if int(r["t"]) == 0 and i > 0]
        for i in starts:
            for ax in (top, bottom):
                ax.axvline(i, color="lightgray", lw=0.5)
    top.set_ylabel("size")
    top.legend(loc="upper right", fontsize=8)
    bottom.set_ylabel("active transversals")
    bottom.set_xlabel("iteration (all rounds)")
    if title:
        top.set_title(title)
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
