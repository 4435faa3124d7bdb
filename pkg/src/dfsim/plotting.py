"""Figure rendering for CLI reports.

Renders capital curves and sweep summaries to PNG files next to the
delimited output.  Everything uses the Agg backend so it works headless.
"""

from __future__ import annotations

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def capital_curves(rounds, eps, out_path, title=""):
    """Plot K_n and (1+eps) F_n over the rounds of one game."""
    ns = [r.n for r in rounds]
    Ks = [r.K for r in rounds]
    Fs = [(1.0 + eps) * r.F for r in rounds]
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.plot(ns, Ks, label="K", lw=1.2)
    ax.plot(ns, Fs, label=f"(1+{eps:g})·F", lw=1.2, ls="--")
    ax.set_xlabel("round")
    ax.set_ylabel("capital")
    if title:
        ax.set_title(title)
    ax.legend()
    ax.grid(alpha=0.3)
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path


def sweep_summary(rows, out_path):
    """Scatter sup K and final F against eps, one marker per sweep cell.

    rows are dicts with keys eps, seed, N, supK, finalF, held.
    """
    fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(9, 4), sharex=True)
    held = [bool(r["held"]) for r in rows]
    colors = ["tab:blue" if h else "tab:red" for h in held]
    ax1.scatter([r["eps"] for r in rows], [r["supK"] for r in rows],
                c=colors, s=18)
    ax1.set_xlabel("eps")
    ax1.set_ylabel("sup K")
    ax2.scatter([r["eps"] for r in rows], [r["finalF"] for r in rows],
                c=colors, s=18)
    ax2.set_xlabel("eps")
    ax2.set_ylabel("final F")
    for ax in (ax1, ax2):
        ax.grid(alpha=0.3)
    fig.suptitle("sweep summary (red = invariant violated)")
    fig.tight_layout()
    fig.savefig(out_path, dpi=120)
    plt.close(fig)
    return out_path
