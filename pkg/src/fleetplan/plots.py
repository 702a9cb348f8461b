"""Report figures (headless; Agg backend, PNG output)."""

from __future__ import annotations

from datetime import datetime, timedelta
from pathlib import Path
from typing import Mapping, Sequence

import matplotlib

matplotlib.use("Agg")

import matplotlib.dates as mdates
import matplotlib.pyplot as plt
from matplotlib.figure import Figure


def forecast_figure(
    origin: datetime,
    base: Sequence[float],
    final: Sequence[float],
    actual: Sequence[float] | None = None,
    title: str = "Hourly demand forecast",
) -> Figure:
    """Base vs adjusted forecast, optionally against realized demand."""
    hours = [origin + timedelta(hours=i) for i in range(len(base))]
    fig, ax = plt.subplots(figsize=(11, 4))
    ax.plot(hours, base, label="base forecast", color="tab:blue", lw=1.2)
    ax.plot(hours, final, label="with adjustments", color="tab:orange", lw=1.2)
    if actual is not None:
        ax.plot(hours, actual, label="actual", color="tab:gray", lw=0.9, ls="--")
    ax.set_ylabel("vehicles in use")
    ax.set_title(title)
    ax.legend(loc="upper left", fontsize=8)
    ax.xaxis.set_major_formatter(mdates.DateFormatter("%a %H:%M"))
    fig.autofmt_xdate()
    fig.tight_layout()
    return fig


def day_schedule_figure(
    buffer: Sequence[int],
    coverage: Sequence[int],
    activations: Sequence[Mapping],
    day_label: str = "",
) -> Figure:
    """Coverage bars against the buffer requirement for one planning day."""
    slots = range(len(buffer))
    fig, ax = plt.subplots(figsize=(9, 3.5))
    ax.bar(slots, coverage, color="tab:green", alpha=0.6, label="disposal coverage")
    ax.step(slots, buffer, where="mid", color="tab:red", lw=1.4, label="buffer b(t)")
    for act in activations:
        ax.axvspan(
            act["start_slot"] - 0.5,
            act["start_slot"] + act["length"] - 0.5,
            color="tab:green",
            alpha=0.08,
        )
    ax.set_xlabel("planning slot (0 = 5am)")
    ax.set_ylabel("drivers")
    ax.set_title(f"Disposal schedule {day_label}".strip())
    ax.legend(loc="upper left", fontsize=8)
    fig.tight_layout()
    return fig


def week_figure(plan: Mapping) -> Figure:
    """Buffer vs coverage for all seven days of a plan."""
    days = plan["days"]
    fig, axes = plt.subplots(7, 1, figsize=(9, 14), sharex=True)
    for ax, entry in zip(axes, days):
        buffer = entry["buffer"]
        slots = range(len(buffer))
        if entry.get("solution"):
            ax.bar(slots, entry["solution"]["coverage"], color="tab:green", alpha=0.6)
            note = f"{entry['solution']['objective']} driver-hours"
        else:
            note = "INFEASIBLE"
        ax.step(slots, buffer, where="mid", color="tab:red", lw=1.2)
        ax.set_ylabel(entry["day"][5:], fontsize=8)
        ax.text(0.99, 0.9, note, transform=ax.transAxes, ha="right", fontsize=8)
    axes[-1].set_xlabel("planning slot (0 = 5am)")
    fig.suptitle(f"Weekly plan {plan['id']} ({plan['status']})")
    fig.tight_layout()
    return fig


def save_figures(
    figures: Mapping[str, Figure], directory: str | Path, fmt: str = "png"
) -> list[Path]:
    """Write each figure to ``directory/<name>.<fmt>`` and close it."""
    directory = Path(directory)
    directory.mkdir(parents=True, exist_ok=True)
    paths = []
    for name, fig in figures.items():
        path = directory / f"{name}.{fmt}"
        fig.savefig(path, dpi=120)
        plt.close(fig)
        paths.append(path)
    return paths
