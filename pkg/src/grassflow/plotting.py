"""Figures for the report commands; matplotlib is imported on first use."""
from __future__ import annotations

import math
from pathlib import Path


def _pyplot():
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
    return plt


def _safe_log(values):
    return [math.log10(v) if v > 0 else float("nan") for v in values]


def residual_plot(rows, path: Path, title: str) -> Path:
    """log10 residual and predicted bound against Re t, one line per Im t."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    by_im = {}
    for r in rows:
        by_im.setdefault(r["im_t"], []).append(r)
    for y, rs in sorted(by_im.items()):
        rs = sorted(rs, key=lambda r: r["re_t"])
        x = [r["re_t"] for r in rs]
        ax.plot(x, [r["log10_residual"] for r in rs], "o-", label=f"residual, Im t = {y:g}")
        ax.plot(x, _safe_log([r["predicted_bound"] for r in rs]), "--", label=f"next order, Im t = {y:g}")
    ax.set_xlabel("Re t")
    ax.set_ylabel("log10 norm")
    ax.set_title(title)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path


def gap_plot(rows, path: Path, title: str) -> Path:
    """Gap to the limiting flow against Re t on log-log axes."""
    plt = _pyplot()
    fig, ax = plt.subplots(figsize=(6, 4))
    by_im = {}
    for r in rows:
        by_im.setdefault(r["im_t"], []).append(r)
    for y, rs in sorted(by_im.items()):
        rs = sorted(rs, key=lambda r: r["re_t"])
        ax.loglog([r["re_t"] for r in rs], [max(r["gap"], 1e-300) for r in rs], "o-", label=f"Im t = {y:g}")
    ax.set_xlabel("Re t")
    ax.set_ylabel("gap")
    ax.set_title(title)
    ax.legend(fontsize=7)
    fig.tight_layout()
    fig.savefig(path, dpi=120)
    plt.close(fig)
    return path
