"""Standard figures for a single run (matplotlib, headless)."""

from __future__ import annotations

import os

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import numpy as np  # noqa: E402

from .errors import MissingData  # noqa: E402
from .metrics import steady_window  # noqa: E402
from .sim import AXES, RunLog  # noqa: E402

LABELS = {"phi": r"$\phi$", "theta": r"$\theta$", "psi": r"$\psi$"}


def _save(fig, path: str) -> str:
    fig.tight_layout()
    fig.savefig(path, dpi=110)
    plt.close(fig)
    return path


def plot_attitude(log: RunLog, path: str) -> str:
    fig, axes = plt.subplots(3, 2, figsize=(10, 7), sharex=True)
    for i, name in enumerate(AXES):
        axes[i, 0].plot(log.t, np.degrees(log.ref[:, i]), "k--", lw=1, label="reference")
        axes[i, 0].plot(log.t, np.degrees(log.Theta[:, i]), lw=1.2, label=log.controller)
        axes[i, 0].set_ylabel(f"{LABELS[name]} [deg]")
        axes[i, 1].plot(log.t, log.omega[:, i], lw=1)
        axes[i, 1].set_ylabel(f"{'pqr'[i]} [rad/s]")
    axes[0, 0].legend(loc="best", fontsize=8)
    axes[-1, 0].set_xlabel("t [s]")
    axes[-1, 1].set_xlabel("t [s]")
    return _save(fig, path)


def plot_torques(log: RunLog, path: str) -> str:
    fig, axes = plt.subplots(3, 1, figsize=(9, 7), sharex=True)
    for i, name in enumerate(AXES):
        axes[i].plot(log.t, log.u[:, i], lw=0.6, label="u")
        axes[i].plot(log.t, log.u_eq[:, i], lw=1, label="u_eq")
        axes[i].set_ylabel(f"torque {LABELS[name]} [N m]")
    axes[0].legend(loc="best", fontsize=8)
    axes[-1].set_xlabel("t [s]")
    return _save(fig, path)


def gain_ylim(alpha, bounds: tuple[float, float] | None = None) -> tuple[float, float]:
    """Y range of the gain plot: the trace plus ``bounds``, padded by 5 %."""
    lo, hi = float(np.min(alpha)), float(np.max(alpha))
    if bounds is not None:
        lo, hi = min(lo, bounds[0]), max(hi, bounds[1])
    pad = 0.05 * max(hi - lo, 1e-3)
    return lo - pad, hi + pad


def plot_gain(log: RunLog, path: str, bounds: tuple[float, float] | None = None) -> str:
    """Gain trace; the y range always includes ``bounds`` when given."""
    fig, ax = plt.subplots(figsize=(9, 4))
    for i, name in enumerate(AXES):
        ax.plot(log.t, log.alpha[:, i], lw=1, label=LABELS[name])
    for b in bounds or ():
        ax.axhline(b, color="grey", ls=":", lw=1)
    ax.set_ylim(*gain_ylim(log.alpha, bounds))
    ax.set_xlabel("t [s]")
    ax.set_ylabel(r"$\alpha$")
    ax.legend(loc="best", fontsize=8)
    return _save(fig, path)


def plot_steady_error(log: RunLog, path: str) -> str:
    """Tracking error of each stepped axis over its steady-state window."""
    events = log.schedule.events
    fig, axes = plt.subplots(len(events), 1, figsize=(9, 2.4 * len(events)), squeeze=False)
    err = np.degrees(log.error_angles)
    for i, ev in enumerate(events):
        start, end = steady_window(log, i)
        mask = (log.t >= start) & (log.t <= end)
        ax = axes[i, 0]
        ax.plot(log.t[mask], err[mask, ev.axis], lw=0.8)
        ax.axhline(0.0, color="k", lw=0.5)
        ax.set_ylabel(f"e {LABELS[AXES[ev.axis]]} [deg]")
    axes[-1, 0].set_xlabel("t [s]")
    return _save(fig, path)


def emit_plots(log: RunLog, out_dir: str, prefix: str = "", gain_bounds=None) -> list[str]:
    """Write the four standard figures as PNG and return their paths."""
    if len(log) == 0:
        raise MissingData("cannot plot an empty run log")
    os.makedirs(out_dir, exist_ok=True)
    base = os.path.join(out_dir, prefix)
    return [
        plot_attitude(log, base + "attitude.png"),
        plot_torques(log, base + "torques.png"),
        plot_gain(log, base + "gain.png", gain_bounds),
        plot_steady_error(log, base + "steady_error.png"),
    ]
