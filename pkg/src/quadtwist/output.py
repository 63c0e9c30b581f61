"""
On-disk artifacts: per-run CSV logs, metric tables and the run manifest.

Every file is written to a temporary sibling first and moved into place with
``os.replace`` so an interrupted run never leaves a truncated file behind.
"""

from __future__ import annotations

import json
import os
import tempfile

import numpy as np

from .errors import MissingData
from .sim import AXES, RunLog

_GROUPED = ("u", "u_eq", "u_D")


def csv_header() -> list[str]:
    cols = ["t"] + list(AXES) + ["p", "q", "r"] + [f"{a}_ref" for a in AXES]
    cols += [f"sigma_{a}" for a in AXES] + [f"sigma_dot_{a}" for a in AXES]
    for a in AXES:
        cols += [f"{g}_{a}" for g in _GROUPED]
    cols += ["alpha_1", "alpha_2", "alpha_3"] + [f"d_{a}" for a in AXES] + ["V", "sat_flags"]
    return cols


def log_table(log: RunLog, stride: int = 1) -> np.ndarray:
    """Numeric matrix matching :func:`csv_header`; angles in degrees.

    ``sat_flags`` is a bit mask: 1 roll, 2 pitch, 4 yaw.
    """
    if len(log) == 0:
        raise MissingData("run log is empty")
    sl = slice(None, None, stride)
    parts = [log.t[sl, None], np.degrees(log.Theta[sl]), log.omega[sl], np.degrees(log.ref[sl]),
             log.sigma[sl], log.sigma_dot[sl]]
    for ax in range(3):
        parts += [getattr(log, g)[sl, ax:ax + 1] for g in _GROUPED]
    flags = log.sat[sl].astype(int) @ np.array([1, 2, 4])
    parts += [log.alpha[sl], log.d[sl], log.V[sl, None], flags[:, None]]
    return np.hstack(parts) + 0.0  # folds -0.0 into 0.0


def _umask() -> int:
    mask = os.umask(0)
    os.umask(mask)
    return mask


def atomic_write(path: str, text: str) -> str:
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.chmod(tmp, 0o666 & ~_umask())
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise
    return path


def run_csv_text(log: RunLog, stride: int = 1) -> str:
    table = log_table(log, stride)
    fmt = ["%.9g"] * (table.shape[1] - 1) + ["%d"]
    lines = [",".join(csv_header())]
    lines += [",".join(f % v for f, v in zip(fmt, row)) for row in table]
    return "\n".join(lines) + "\n"


def write_run_csv(log: RunLog, path: str, stride: int = 1) -> str:
    return atomic_write(path, run_csv_text(log, stride))


def read_run_csv(path: str) -> dict:
    """Load a run CSV back as ``{column: array}``."""
    data = np.genfromtxt(path, delimiter=",", names=True)
    return {name: np.asarray(data[name]) for name in data.dtype.names}


def write_manifest(path: str, payload: dict) -> str:
    return atomic_write(path, json.dumps(payload, indent=2, sort_keys=True, default=str) + "\n")
