"""Figure rendering for the table outputs (headless Agg backend, files only)."""

from __future__ import annotations

import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt

from .bounds import TradeoffCurve

__all__ = ["save_tradeoff_figure", "save_report_figure"]

_METRIC_COLUMNS = [
    ("si_sdr_db", "scale-invariant ratio (dB)"),
    ("si_sdri_db", "improvement over mixture (dB)"),
    ("sdr_db", "plain ratio (dB)"),
]


def save_tradeoff_figure(curves: list[TradeoffCurve], path: str | Path) -> Path:
    """One panel: score vs achieved output SNR, one line per reference SNR.

    The +inf anchor point (noise kept in full) cannot be drawn and is
    omitted; a dashed horizontal line marks each curve's reference SNR.
    """
    fig, ax = plt.subplots(figsize=(7.0, 4.5))
    for curve in curves:
        xs = [p.output_snr_db for p in curve.points if math.isfinite(p.si_sdr_db)]
        ys = [p.si_sdr_db for p in curve.points if math.isfinite(p.si_sdr_db)]
        (line,) = ax.plot(xs, ys, marker=".", markersize=3, linewidth=1.2,
                          label=f"reference SNR {curve.reference_snr_db:g} dB")
        ax.axhline(curve.reference_snr_db, color=line.get_color(),
                   linestyle="--", linewidth=0.8, alpha=0.5)
    ax.set_xlabel("output SNR after scaling the noise (dB)")
    ax.set_ylabel("score against the noisy reference (dB)")
    ax.grid(alpha=0.3)
    ax.legend(fontsize=8)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out


def save_report_figure(merged_rows: list[dict], path: str | Path) -> Path:
    """Three panels (one per score column): mean per label with p05–p95 bars."""
    labels: list[str] = []
    for row in merged_rows:
        if row["label"] not in labels:
            labels.append(row["label"])
    by_key = {(r["label"], r["statistic"]): r for r in merged_rows}
    fig, axes = plt.subplots(1, len(_METRIC_COLUMNS), figsize=(10.5, 3.8), sharex=True)
    for ax, (column, title) in zip(axes, _METRIC_COLUMNS):
        xs, means, lows, highs = [], [], [], []
        for i, label in enumerate(labels):
            mean = by_key[(label, "mean")][column]
            p05 = by_key[(label, "p05")][column]
            p95 = by_key[(label, "p95")][column]
            if not math.isfinite(mean):
                continue
            xs.append(i)
            means.append(mean)
            lows.append(max(mean - p05, 0.0) if math.isfinite(p05) else 0.0)
            highs.append(max(p95 - mean, 0.0) if math.isfinite(p95) else 0.0)
        ax.bar(xs, means, yerr=[lows, highs], capsize=3, width=0.6)
        ax.set_xticks(range(len(labels)))
        ax.set_xticklabels(labels, rotation=20, ha="right", fontsize=8)
        ax.set_title(title, fontsize=9)
        ax.grid(axis="y", alpha=0.3)
    fig.tight_layout()
    out = Path(path)
    fig.savefig(out, dpi=150)
    plt.close(fig)
    return out
