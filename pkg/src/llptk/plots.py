"""Figure rendering for experiment outputs.

Reads the CSVs an experiment wrote and renders matplotlib figures to PNG
files in the same directory.  Plot rendering is a display layer only: no
experiment result depends on it.
"""

from __future__ import annotations

import csv
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt  # noqa: E402


def _read_csv(path):
    with open(path) as fh:
        reader = csv.DictReader(fh)
        return list(reader)


def _f(row, key):
    val = row.get(key, "")
    return float(val) if val not in ("", None) else None


def render_learning_curve(out_dir) -> Path:
    out_dir = Path(out_dir)
    rows = _read_csv(out_dir / "learning_curve.csv")
    means = [r for r in rows if r["run"] == "mean"]
    stds = {(r["bag_count"], r["bag_size"]): _f(r, "test_instance_error")
            for r in rows if r["run"] == "std"}
    fig, ax = plt.subplots(figsize=(5, 4))
    by_r = {}
    for r in means:
        by_r.setdefault(r["bag_size"], []).append(r)
    for bag_size, series in sorted(by_r.items(), key=lambda kv: float(kv[0] or 0)):
        xs = [int(s["bag_count"]) * int(s["bag_size"]) for s in series]
        ys = [_f(s, "test_instance_error") for s in series]
        es = [stds.get((s["bag_count"], s["bag_size"]), 0.0) or 0.0 for s in series]
        order = sorted(range(len(xs)), key=xs.__getitem__)
        ax.errorbar([xs[i] for i in order], [ys[i] for i in order],
                    yerr=[es[i] for i in order], marker="o", capsize=3,
                    label=f"r = {bag_size}")
    ax.set_xscale("log")
    ax.set_xlabel("training instances")
    ax.set_ylabel("test instance error")
    ax.legend()
    fig.tight_layout()
    path = out_dir / "learning_curve.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_group_table(out_dir) -> Path:
    out_dir = Path(out_dir)
    rows = _read_csv(out_dir / "group_table.csv")
    means = [r for r in rows if r["run"] == "mean"]
    stds = [r for r in rows if r["run"] == "std"]
    labels = [r["grouping"] for r in means]
    psvm = [_f(r, "test_instance_error") for r in means]
    errs = [_f(r, "test_instance_error") or 0.0 for r in stds]
    base = [_f(r, "baseline_error") for r in means]
    fig, ax = plt.subplots(figsize=(5, 4))
    x = range(len(labels))
    ax.bar([i - 0.2 for i in x], psvm, width=0.4, yerr=errs, capsize=3,
           label="proportion SVM")
    ax.bar([i + 0.2 for i in x], base, width=0.4, label="baseline")
    ax.set_xticks(list(x), labels, rotation=20)
    ax.set_ylabel("test error")
    ax.legend()
    fig.tight_layout()
    path = out_dir / "group_table.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_bound_sweep(out_dir) -> Path:
    out_dir = Path(out_dir)
    fig, axes = plt.subplots(1, 4, figsize=(16, 3.6))
    for ax, panel in zip(axes[:3], ("a", "b", "c")):
        rows = _read_csv(out_dir / f"match_prob_panel_{panel}.csv")
        series = {}
        for row in rows:
            key = row["r"] if panel in ("a", "b") else row["epsilon"]
            series.setdefault(key, []).append(row)
        for key, pts in series.items():
            xs = [_f(p, "match_prob") for p in pts]
            ys = [_f(p, "beta") for p in pts]
            label = f"r = {key}" if panel in ("a", "b") else f"eps = {key}"
            ax.plot(xs, ys, label=label)
        ax.set_xlabel("match probability")
        ax.set_ylabel("instance error")
        ax.set_title(f"panel ({panel})")
        ax.legend(fontsize=7)
    rows = _read_csv(out_dir / "match_prob_panel_d.csv")
    ax = axes[3]
    series = {}
    for row in rows:
        series.setdefault(row["epsilon"], []).append(row)
    for eps, pts in sorted(series.items(), key=lambda kv: float(kv[0])):
        xs = [int(p["r"]) for p in pts]
        ys = [_f(p, "u_threshold") for p in pts]
        order = sorted(range(len(xs)), key=xs.__getitem__)
        ax.plot([xs[i] for i in order], [ys[i] for i in order], marker="o",
                label=f"eps = {eps}")
    ax.set_xlabel("bag size r")
    ax.set_ylabel("u(r, eps)")
    ax.set_title("panel (d)")
    ax.legend(fontsize=7)
    fig.tight_layout()
    path = out_dir / "bound_sweep.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path


def render_privacy_sweep(out_dir) -> Path:
    out_dir = Path(out_dir)
    rows = _read_csv(out_dir / "privacy_sweep.csv")
    by_eta = {}
    for row in rows:
        by_eta.setdefault(float(row["eta"]), []).append(float(row["test_instance_error"]))
    etas = sorted(by_eta)
    means = [sum(by_eta[e]) / len(by_eta[e]) for e in etas]
    ref = float(rows[0]["nonprivate_error"]) if rows else None
    fig, ax = plt.subplots(figsize=(5, 4))
    ax.semilogx(etas, means, marker="o", label="private training")
    if ref is not None:
        ax.axhline(ref, linestyle="--", color="gray", label="non-private")
    ax.set_xlabel("privacy budget eta")
    ax.set_ylabel("test instance error")
    ax.legend()
    fig.tight_layout()
    path = out_dir / "privacy_sweep.png"
    fig.savefig(path, dpi=150)
    plt.close(fig)
    return path
