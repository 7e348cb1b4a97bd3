"""Open- and closed-loop fidelity metrics between surrogate and controller."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from ..env import Environment
from ..policy import ACTION_HIGH, ACTION_LOW, ACTION_NAMES, Action, denormalize
from ..tree.model import LmTree
from ..vessel import thrust_allocation
from .rollout import Dataset, Episode, rollout
from .starts import Start

# physical range widths used for percent-of-range figures; angles in degrees
RANGE_WIDTHS = (170.0, 170.0, 100.0, 180.0, 180.0)
ACTION_UNITS = ("kN", "kN", "kN", "deg", "deg")
_TO_REPORT_UNITS = np.array([1.0, 1.0, 1.0, 180.0 / math.pi, 180.0 / math.pi])


@dataclass
class OutputErrorRow:
    action: str
    unit: str
    mae: float
    mae_pct: float
    std: float
    std_pct: float

    def to_dict(self) -> Dict:
        return {
            "action": self.action,
            "unit": self.unit,
            "mae": self.mae,
            "mae_pct": self.mae_pct,
            "std": self.std,
            "std_pct": self.std_pct,
        }


def output_error(tree: LmTree, dataset: Dataset) -> List[OutputErrorRow]:
    """Per-action mean absolute error and error std, absolute and % of range.

    The dataset's targets are the black box's normalized actions; both sides
    are denormalized to physical units (azimuths reported in degrees). Tree
    predictions are clipped to the physical ranges first, exactly as the
    surrogate controller applies them.
    """
    if not len(dataset):
        raise ValueError("empty test set")
    pred = np.clip(denormalize(tree.predict_batch(dataset.X)), ACTION_LOW, ACTION_HIGH)
    ref = denormalize(dataset.Y)
    err = (pred - ref) * _TO_REPORT_UNITS
    rows = []
    for i, name in enumerate(ACTION_NAMES):
        mae = float(np.mean(np.abs(err[:, i])))
        std = float(np.std(err[:, i]))
        rows.append(
            OutputErrorRow(
                action=name,
                unit=ACTION_UNITS[i],
                mae=mae,
                mae_pct=100.0 * mae / RANGE_WIDTHS[i],
                std=std,
                std_pct=100.0 * std / RANGE_WIDTHS[i],
            )
        )
    return rows


def force_comparison(tree: LmTree, episode: Episode, thrusters) -> Dict:
    """Per-step force/moment gap between recorded and surrogate actions.

    Both action vectors map through the thrust allocation, capturing that
    different thruster settings can produce the same net force.
    """
    if not episode.steps:
        raise ValueError("episode has no recorded steps")
    deltas = []
    series = []
    for rec in episode.steps:
        a_policy = rec.controller_action
        a_tree = Action(*denormalize(tree.predict(np.asarray(rec.state, dtype=float))))
        f_p = thrust_allocation(a_policy, thrusters)
        f_t = thrust_allocation(a_tree, thrusters, check_range=False)
        series.append({"policy": f_p, "surrogate": f_t})
        deltas.append([f_p[k] - f_t[k] for k in range(3)])
    deltas = np.array(deltas)
    comp = ("fx", "fy", "torque")
    return {
        "series": series,
        "mae": {c: float(np.mean(np.abs(deltas[:, k]))) for k, c in enumerate(comp)},
        "std": {c: float(np.std(deltas[:, k])) for k, c in enumerate(comp)},
        "max": {c: float(np.max(np.abs(deltas[:, k]))) for k, c in enumerate(comp)},
    }


def path_comparison(
    controllers: Dict[str, object],
    env: Environment,
    starts: Sequence[Start],
) -> Tuple[List[Dict], Dict[Tuple[str, int], Episode]]:
    """Closed-loop outcome table over shared starts, plus the raw episodes."""
    if not starts:
        raise ValueError("need at least one start")
    table: List[Dict] = []
    episodes: Dict[Tuple[str, int], Episode] = {}
    for name, controller in controllers.items():
        for i, start in enumerate(starts):
            ep = rollout(controller, env, start)
            episodes[(name, i)] = ep
            table.append(
                {
                    "controller": name,
                    "start": i,
                    "outcome": ep.outcome,
                    "steps": len(ep.steps),
                    "cumulative_reward": ep.cumulative_reward,
                }
            )
    return table, episodes


def reward_comparison(ep_a: Episode, ep_b: Episode) -> Dict:
    """Aligned per-step reward overlay and the cumulative gap."""
    if ep_a.start_pose != ep_b.start_pose or ep_a.start_vel != ep_b.start_vel:
        raise ValueError("episodes do not share a starting point")
    ra = ep_a.reward_series()
    rb = ep_b.reward_series()
    n = min(len(ra), len(rb))
    ca = float(ra.sum())
    cb = float(rb.sum())
    return {
        "per_step_a": ra[:n].tolist(),
        "per_step_b": rb[:n].tolist(),
        "cumulative_a": ca,
        "cumulative_b": cb,
        "gap": abs(ca - cb),
        "gap_pct": 100.0 * abs(ca - cb) / max(abs(ca), 1e-12),
    }


def closed_loop_agreement(
    table: List[Dict], name_a: str, name_b: str
) -> Dict:
    """Outcome agreement rate and reward-gap stats between two controllers."""
    rows_a = {r["start"]: r for r in table if r["controller"] == name_a}
    rows_b = {r["start"]: r for r in table if r["controller"] == name_b}
    agree = []
    gaps = []
    for i in rows_a:
        same = rows_a[i]["outcome"] == rows_b[i]["outcome"]
        agree.append(same)
        if same:
            ca = rows_a[i]["cumulative_reward"]
            cb = rows_b[i]["cumulative_reward"]
            gaps.append(100.0 * abs(ca - cb) / max(abs(ca), 1e-12))
    return {
        "n_starts": len(agree),
        "agreement": float(np.mean(agree)) if agree else 0.0,
        "median_reward_gap_pct": float(np.median(gaps)) if gaps else float("nan"),
    }
