"""Step reward: distance, heading, obstacle, and approach-rate components."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple


@dataclass(frozen=True)
class RewardParams:
    c_obs_terminal: float = -600.0
    c_obs: float = -2.5
    c_dd: float = 2.5
    c_psi: float = 2.5
    c_ddot: float = 1.0
    sigma_obs: float = 1.0
    sigma_dd: float = 10.0
    sigma_psi: float = 0.17

    def __post_init__(self):
        if min(self.sigma_obs, self.sigma_dd, self.sigma_psi) <= 0.0:
            raise ValueError("reward sigmas must be positive")


class RewardComponents(NamedTuple):
    total: float
    r_dd: float
    r_psi: float
    r_obs: float
    r_ddot: float


def _bell(c: float, value: float, sigma: float) -> float:
    # c * exp(-(value^2)^2 / (2 sigma^2)); quartic falloff in the value
    return c * math.exp(-((value * value) ** 2) / (2.0 * sigma * sigma))


def reward(
    x_err: float,
    y_err: float,
    psi_err: float,
    contact: int,
    d_obs: float,
    d_dot: float,
    params: RewardParams = RewardParams(),
) -> RewardComponents:
    """Evaluate all four reward components and their sum.

    d_dot is the finite-difference rate of the berth distance
    d_d = sqrt(x_err^2 + y_err^2), supplied by the episode runner.

    The heading component is gated on proximity: it is active only while the
    distance component already earns at least half its own peak value
    (the peak doubles as the gate constant).
    """
    d_d = math.hypot(x_err, y_err)
    heading_ok = abs(psi_err) < math.pi / 2.0
    free = contact == 0

    r_dd = _bell(params.c_dd, d_d, params.sigma_dd) if free and heading_ok else 0.0

    c_dock = params.c_dd
    r_psi = (
        _bell(params.c_psi, psi_err, params.sigma_psi)
        if free and r_dd >= c_dock / 2.0
        else 0.0
    )

    r_obs = (
        _bell(params.c_obs, d_obs, params.sigma_obs)
        if free and heading_ok
        else params.c_obs_terminal
    )

    if d_dot > 0.0 and heading_ok:
        r_ddot = 0.0
    else:
        r_ddot = params.c_ddot * d_dot

    total = r_dd + r_psi + r_obs + r_ddot
    return RewardComponents(total, r_dd, r_psi, r_obs, r_ddot)
