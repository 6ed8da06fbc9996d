"""Matplotlib renderings of the report tables, written next to the CSV data."""

from __future__ import annotations

from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402

# Fixed metadata keeps repeated renders byte-identical.
_SAVE_KW = {"dpi": 150, "metadata": {"Software": "twinway"}}

MODE_STYLES = {
    "physical": {"color": "black", "marker": "o"},
    "cidt": {"color": "tab:blue", "marker": "s"},
    "pidt": {"color": "tab:red", "marker": "^"},
}


def save_speed_histogram(speeds_by_label: dict[str, list[float]], path: str | Path):
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for label, speeds in speeds_by_label.items():
        ax.hist(speeds, bins=30, density=True, alpha=0.55, label=label)
    ax.set_xlabel("trip mean speed [m/s]")
    ax.set_ylabel("density")
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_divergence_vs_interval(rows: list[dict], path: str | Path):
    """2x2 panel: each divergence metric against the emission interval."""
    rows = sorted(rows, key=lambda r: r["emission_interval_s"])
    intervals = [r["emission_interval_s"] for r in rows]
    panels = [("kl_nats", "KL divergence [nats]"),
              ("js_nats", "JS divergence [nats]"),
              ("wasserstein_mps", "Wasserstein distance [m/s]"),
              ("bhattacharyya", "Bhattacharyya distance")]
    fig, axes = plt.subplots(2, 2, figsize=(8.0, 6.0), sharex=True)
    for ax, (key, label) in zip(axes.flat, panels):
        ax.plot(intervals, [r[key] for r in rows], marker="o")
        ax.set_ylabel(label)
        ax.grid(True, alpha=0.3)
    for ax in axes[-1]:
        ax.set_xlabel("emission interval [s]")
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)


def save_sweep_lines(rows, quantity: str, ylabel: str, path: str | Path):
    """Totals vs EV penetration, one line per information mode."""
    levels = [r.level for r in rows]
    fig, ax = plt.subplots(figsize=(6.0, 4.0))
    for mode in ("physical", "cidt", "pidt"):
        values = [getattr(r, f"{mode}_{quantity}") for r in rows]
        ax.plot(levels, values, label=mode, **MODE_STYLES[mode])
    ax.set_xlabel("EV penetration")
    ax.set_ylabel(ylabel)
    ax.grid(True, alpha=0.3)
    ax.legend()
    fig.tight_layout()
    fig.savefig(path, **_SAVE_KW)
    plt.close(fig)
