"""Matplotlib renderings written next to each command's CSV outputs."""

from __future__ import annotations

import csv

import matplotlib
matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np


def _save(fig, path):
    fig.tight_layout()
    fig.savefig(path, dpi=130)
    plt.close(fig)


def training_curves(metrics_csv, out_png):
    """Loss curves plus the sparsity/stride/zeta schedule panel."""
    steps, tr, vs_step, vs, sp, zeta, stride = [], [], [], [], [], [], []
    with open(metrics_csv) as f:
        for row in csv.DictReader(f):
            steps.append(int(row["step"]))
            tr.append(float(row["train_loss"]))
            sp.append(float(row["sparsity"]))
            zeta.append(float(row["zeta"]))
            stride.append(int(row["stride"]))
            if row["val_loss"]:
                vs_step.append(int(row["step"]))
                vs.append(float(row["val_loss"]))
    fig, (ax1, ax2) = plt.subplots(2, 1, figsize=(7.5, 6.5), sharex=True)
    ax1.plot(steps, tr, lw=0.7, alpha=0.6, label="train loss")
    if vs:
        ax1.plot(vs_step, vs, lw=1.6, label="val loss")
    ax1.set_ylabel("cross entropy")
    ax1.legend()
    ax1.grid(alpha=0.3)
    ax2.plot(steps, sp, label="global sparsity")
    ax2.plot(steps, zeta, label="zeta")
    dense = [1.0 if s == 1 else 0.0 for s in stride]
    ax2.plot(steps, dense, ls="--", label="dense attention")
    ax2.set_xlabel("step")
    ax2.set_ylabel("schedule value")
    ax2.legend()
    ax2.grid(alpha=0.3)
    _save(fig, out_png)


def flop_breakdown(components, out_png):
    """Horizontal bar chart of forward FLOPs per component."""
    names = list(components)
    vals = np.array([components[k] for k in names], dtype=float)
    fig, ax = plt.subplots(figsize=(7, 4))
    ax.barh(names[::-1], vals[::-1] / 1e9)
    ax.set_xlabel("GFLOPs per sequence (forward)")
    total = vals.sum()
    for i, k in enumerate(names[::-1]):
        ax.text(components[k] / 1e9, i, f" {components[k] / total * 100:.1f}%",
                va="center", fontsize=8)
    _save(fig, out_png)


def schedule_area(steps, density, q_atten, out_png):
    """Accounted compute intensity over the run."""
    fig, ax = plt.subplots(figsize=(7.5, 4))
    ax.plot(steps, density, label="weight density (1 - S)")
    ax.plot(steps, q_atten, label="attention density q")
    ax.fill_between(steps, 0, density, alpha=0.15)
    ax.set_xlabel("step")
    ax.set_ylabel("density")
    ax.set_ylim(0, 1.05)
    ax.legend()
    ax.grid(alpha=0.3)
    _save(fig, out_png)


def pattern_figure(pattern, out_png):
    fig, ax = plt.subplots(figsize=(5.5, 5.5))
    ax.imshow(pattern.mask, cmap="Greys", interpolation="nearest")
    ax.set_title(f"{pattern.kind} n={pattern.n} l={pattern.l}"
                 + (f" c={pattern.c}" if pattern.kind == "fixed" else ""))
    ax.set_xlabel("key")
    ax.set_ylabel("query")
    _save(fig, out_png)


def mask_heatmap(name, mask, out_png):
    fig, ax = plt.subplots(figsize=(6.5, 5))
    ax.imshow(mask, cmap="Greys", interpolation="nearest", aspect="auto")
    density = mask.mean()
    ax.set_title(f"{name}: {mask.shape[0]}x{mask.shape[1]}, density {density:.4f}")
    ax.set_xlabel("input")
    ax.set_ylabel("output")
    _save(fig, out_png)
