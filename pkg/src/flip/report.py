"""Figures and delimited summaries for finished runs.

Everything here consumes the round records a run produced and writes
plain artifacts: one CSV with the per-round numbers and three PNG
figures (accuracy, privacy spend, memory profile). The memory figure is
the visual contrast between the two samplers: fixed-size batches draw a
flat line, Poisson batches jitter.
"""
from __future__ import annotations

import csv
import math
from pathlib import Path

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

SUMMARY_NAME = "summary.csv"
FIGURE_NAMES = ("accuracy.png", "privacy.png", "memory.png")


def summary_header(client_count: int) -> list[str]:
    header = ["round", "accuracy", "loss"]
    header += [f"eps_client_{i}" for i in range(client_count)]
    header += [f"mem_peak_client_{i}" for i in range(client_count)]
    return header


def summary_rows(rounds) -> list[list]:
    rows = []
    for record in rounds:
        row = [record.round_index, record.accuracy, record.loss]
        row += [s.epsilon_spent for s in record.clients]
        row += [s.memory_peak_units for s in record.clients]
        rows.append(row)
    return rows


def write_summary_csv(path, rounds) -> Path:
    path = Path(path)
    client_count = len(rounds[0].clients) if rounds else 0
    with open(path, "w", encoding="utf-8", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(summary_header(client_count))
        writer.writerows(summary_rows(rounds))
    return path


def _empty_figure(message: str):
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.text(0.5, 0.5, message, ha="center", va="center")
    ax.set_axis_off()
    return fig


def accuracy_figure(rounds):
    if not rounds:
        return _empty_figure("no rounds completed")
    indices = [r.round_index for r in rounds]
    fig, ax = plt.subplots(figsize=(6, 4))
    ax.plot(indices, [r.accuracy for r in rounds], marker="o",
            label="accuracy")
    ax.set_xlabel("round")
    ax.set_ylabel("test accuracy")
    ax.set_ylim(0.0, 1.0)
    twin = ax.twinx()
    twin.plot(indices, [r.loss for r in rounds], linestyle="--",
              color="tab:red", label="loss")
    twin.set_ylabel("test loss")
    ax.set_title("global model per round")
    fig.tight_layout()
    return fig


def privacy_figure(rounds):
    if not rounds:
        return _empty_figure("no rounds completed")
    indices = [r.round_index for r in rounds]
    fig, ax = plt.subplots(figsize=(6, 4))
    clients = len(rounds[0].clients)
    any_finite = False
    for i in range(clients):
        spent = [r.clients[i].epsilon_spent for r in rounds]
        plotted = [v if math.isfinite(v) else np.nan for v in spent]
        any_finite = any_finite or any(math.isfinite(v) for v in spent)
        ax.plot(indices, plotted, marker=".", label=f"client {i}")
    if not any_finite:
        ax.text(0.5, 0.5, "no noise, so no finite epsilon",
                ha="center", va="center", transform=ax.transAxes)
    ax.set_xlabel("round")
    ax.set_ylabel("epsilon spent")
    ax.legend(loc="best", fontsize="small")
    ax.set_title("privacy budget spent per client")
    fig.tight_layout()
    return fig


def memory_figure(rounds):
    if not rounds:
        return _empty_figure("no rounds completed")
    indices = [r.round_index for r in rounds]
    fig, ax = plt.subplots(figsize=(6, 4))
    for i in range(len(rounds[0].clients)):
        peaks = [r.clients[i].memory_peak_units for r in rounds]
        ax.step(indices, peaks, where="mid", label=f"client {i}")
    ax.set_xlabel("round")
    ax.set_ylabel("peak memory (abstract units)")
    ax.legend(loc="best", fontsize="small")
    ax.set_title("per-round memory peaks")
    fig.tight_layout()
    return fig


def write_report(directory, rounds) -> dict[str, Path]:
    """Render summary.csv plus the three figures into a directory."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = {SUMMARY_NAME: write_summary_csv(directory / SUMMARY_NAME, rounds)}
    builders = (accuracy_figure, privacy_figure, memory_figure)
    for name, builder in zip(FIGURE_NAMES, builders):
        fig = builder(rounds)
        target = directory / name
        fig.savefig(target, dpi=110)
        plt.close(fig)
        paths[name] = target
    return paths
