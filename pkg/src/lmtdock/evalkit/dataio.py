"""File formats: the 14-column dataset CSV and newline-delimited episodes."""

from __future__ import annotations

import json
from pathlib import Path
from typing import Dict, Optional

import numpy as np

from ..harbor import FEATURE_NAMES
from .rollout import Dataset, Episode
from ..vessel import Pose, Velocity

TARGET_NAMES = ("f1_n", "f2_n", "f3_n", "alpha1_n", "alpha2_n")
CSV_HEADER = ",".join(FEATURE_NAMES + TARGET_NAMES)
EPISODE_FORMAT_VERSION = 1


class DatasetFormatError(ValueError):
    pass


def save_dataset(ds: Dataset, path, extra_stats: Optional[Dict] = None) -> None:
    """Write the fixed-header CSV plus a .stats.json sidecar."""
    path = Path(path)
    data = np.column_stack([ds.X, ds.Y])
    np.savetxt(path, data, delimiter=",", header=CSV_HEADER, comments="", fmt="%.17g")
    stats = {
        "rows": int(len(ds)),
        "feature_mean": ds.feature_mean.tolist(),
        "feature_std": ds.feature_std.tolist(),
    }
    stats.update(extra_stats or {})
    with open(path.with_suffix(path.suffix + ".stats.json"), "w") as fh:
        json.dump(stats, fh, indent=2, sort_keys=True)


def load_dataset(path) -> Dataset:
    path = Path(path)
    with open(path) as fh:
        header = fh.readline().strip()
    if header != CSV_HEADER:
        raise DatasetFormatError(
            f"dataset header mismatch: expected {CSV_HEADER!r}"
        )
    data = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if data.shape[1] != 14:
        raise DatasetFormatError("dataset must have 14 columns")
    mean = std = None
    sidecar = path.with_suffix(path.suffix + ".stats.json")
    if sidecar.exists():
        with open(sidecar) as fh:
            stats = json.load(fh)
        mean = np.array(stats["feature_mean"], dtype=float)
        std = np.array(stats["feature_std"], dtype=float)
    return Dataset(X=data[:, :9], Y=data[:, 9:], feature_mean=mean, feature_std=std)


def _step_dict(rec) -> Dict:
    return {
        "type": "step",
        "step": rec.step,
        "t": rec.t,
        "state": list(rec.state),
        "action": list(rec.controller_action),
        "active": list(rec.active_action),
        "surrogate": list(rec.surrogate_action) if rec.surrogate_action is not None else None,
        "attr": rec.attribution.to_json_dict() if rec.attribution is not None else None,
        "forces": list(rec.forces),
        "reward": {
            "total": rec.reward.total,
            "r_dd": rec.reward.r_dd,
            "r_psi": rec.reward.r_psi,
            "r_obs": rec.reward.r_obs,
            "r_ddot": rec.reward.r_ddot,
        },
        "pose": list(rec.pose),
        "vel": list(rec.velocity),
        "mode": rec.control_mode,
    }


def save_episode(ep: Episode, path, extra_header: Optional[Dict] = None) -> None:
    """One JSON object per line: an index header, then one line per step."""
    header = {
        "type": "header",
        "version": EPISODE_FORMAT_VERSION,
        "h": ep.h,
        "outcome": ep.outcome,
        "cumulative_reward": ep.cumulative_reward,
        "n_steps": len(ep.steps),
        "start_pose": list(ep.start_pose),
        "start_vel": list(ep.start_vel),
    }
    header.update(extra_header or {})
    with open(path, "w") as fh:
        fh.write(json.dumps(header, sort_keys=True) + "\n")
        for rec in ep.steps:
            fh.write(json.dumps(_step_dict(rec), sort_keys=True) + "\n")


def load_episode_raw(path) -> Dict:
    """Episode file as {header, steps: [dict]} without rebuilding records."""
    with open(path) as fh:
        header = json.loads(fh.readline())
        if header.get("type") != "header" or header.get("version") != EPISODE_FORMAT_VERSION:
            raise DatasetFormatError("not a supported episode file")
        steps = [json.loads(line) for line in fh if line.strip()]
    return {"header": header, "steps": steps}
