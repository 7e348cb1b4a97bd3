"""Starting-point generation and the train/val/test split."""

from __future__ import annotations

import math
from typing import Dict, List, Tuple

import numpy as np

from ..harbor import HarborGeometry
from ..vessel import Pose, Velocity

Start = Tuple[Pose, Velocity]


class SamplingError(RuntimeError):
    """Raised when the requested clearance leaves no feasible region."""


def gen_starting_points(
    n: int,
    seed: int,
    geom: HarborGeometry,
    clearance: float = 50.0,
    max_speed: float = 0.3,
    max_yaw_rate: float = 0.02,
) -> List[Start]:
    """Sample unique poses uniformly inside the docking area.

    Positions keep at least `clearance` meters to every boundary plane
    (enough that the enlarged hull cannot protrude at any heading), headings
    are uniform over (-pi, pi], and initial velocities are small and random.
    Deterministic per seed.
    """
    if n < 1:
        raise ValueError("need at least one starting point")
    rng = np.random.default_rng(seed)
    verts = geom.dock_vertices
    lo = verts.min(axis=0)
    hi = verts.max(axis=0)
    norms = np.linalg.norm(geom.dock_A, axis=1)
    starts: List[Start] = []
    seen = set()
    attempts = 0
    limit = 10_000 * n
    while len(starts) < n:
        attempts += 1
        if attempts > limit:
            raise SamplingError(
                f"could not place {n} points with {clearance} m clearance"
            )
        p = rng.uniform(lo, hi)
        if np.min((geom.dock_b - geom.dock_A @ p) / norms) < clearance:
            continue
        psi = float(rng.uniform(-math.pi, math.pi))
        u, v = rng.uniform(-max_speed, max_speed, 2)
        r = float(rng.uniform(-max_yaw_rate, max_yaw_rate))
        key = (round(float(p[0]), 6), round(float(p[1]), 6))
        if key in seen:
            continue
        seen.add(key)
        starts.append((Pose(float(p[0]), float(p[1]), psi), Velocity(float(u), float(v), r)))
    return starts


def split_starts(starts: List[Start]) -> Dict[str, List[Start]]:
    """80/5/15 partition in sampling order (train, validation, test)."""
    n = len(starts)
    n_train = round(0.8 * n)
    n_val = round(0.05 * n)
    return {
        "train": starts[:n_train],
        "val": starts[n_train : n_train + n_val],
        "test": starts[n_train + n_val :],
    }
