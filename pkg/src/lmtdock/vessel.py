"""3-DOF vessel model: rigid-body dynamics, thrusters, Euler integration.

Forces are commanded in kN (matching the action ranges); the mass and
damping matrices are SI (kg, N s/m), so commands are scaled by 1e3 inside
the integrator.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple, Optional, Sequence, Tuple

import numpy as np

from .geometry import rotation, rotation2, wrap_angle

KN_TO_N = 1.0e3


class Pose(NamedTuple):
    x: float
    y: float
    psi: float  # wrapped to (-pi, pi]


class Velocity(NamedTuple):
    u: float
    v: float
    r: float


class ModelConfigError(ValueError):
    """Raised when a vessel model is unusable (singular mass matrix etc.)."""


class ActionRangeError(ValueError):
    """Raised when a commanded action violates the physical thruster ranges."""


@dataclass(frozen=True)
class Thruster:
    lx: float  # moment arm, m forward of origin
    ly: float  # moment arm, m starboard of origin
    force_min: float  # kN
    force_max: float  # kN
    angle_fixed: Optional[float] = None  # rad; None for azimuth thrusters


@dataclass(frozen=True)
class VesselModel:
    """Rigid-body mass/damping matrices plus the thruster layout.

    The default values shipped in vessel.json are plausible for an ~80 m
    harbor vessel; they are not measured data.
    """

    mass_matrix: np.ndarray
    damping_matrix: np.ndarray
    thrusters: Tuple[Thruster, ...]
    current: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def __post_init__(self):
        M = np.asarray(self.mass_matrix, dtype=float)
        D = np.asarray(self.damping_matrix, dtype=float)
        if M.shape != (3, 3) or D.shape != (3, 3):
            raise ModelConfigError("mass and damping matrices must be 3x3")
        if not np.allclose(M, M.T, rtol=1e-9, atol=1e-9):
            raise ModelConfigError("mass matrix must be symmetric")
        try:
            eigvals = np.linalg.eigvalsh(M)
        except np.linalg.LinAlgError as exc:
            raise ModelConfigError("mass matrix is not diagonalizable") from exc
        if np.min(eigvals) <= 0.0:
            raise ModelConfigError("mass matrix must be positive definite")
        if len(self.thrusters) != 3:
            raise ModelConfigError("expected exactly 3 thrusters")
        if self.thrusters[2].angle_fixed is None or not math.isclose(
            self.thrusters[2].angle_fixed, math.pi / 2.0, rel_tol=0.0, abs_tol=1e-12
        ):
            raise ModelConfigError("thruster 3 must be a tunnel thruster fixed at pi/2")
        object.__setattr__(self, "mass_matrix", M)
        object.__setattr__(self, "damping_matrix", D)
        object.__setattr__(self, "current", np.asarray(self.current, dtype=float).reshape(2))
        object.__setattr__(self, "_m_inv", np.linalg.inv(M))

    @property
    def mass_inverse(self) -> np.ndarray:
        return self._m_inv


def thrust_allocation(action, thrusters: Sequence[Thruster], check_range: bool = True):
    """Total body-frame force and moment (Fx kN, Fy kN, T kN m) of an action.

    Fx = sum f_i cos(a_i), Fy = sum f_i sin(a_i),
    T  = sum f_i (lx_i sin(a_i) - ly_i cos(a_i)),
    with the tunnel thruster's angle fixed at pi/2.
    """
    f = [action.f1, action.f2, action.f3]
    angles = [action.alpha1, action.alpha2]
    if check_range:
        for i, (fi, th) in enumerate(zip(f, thrusters), start=1):
            if not th.force_min - 1e-9 <= fi <= th.force_max + 1e-9:
                raise ActionRangeError(
                    f"thruster {i} force {fi} kN outside [{th.force_min}, {th.force_max}]"
                )
        for i, a in enumerate(angles, start=1):
            if not -math.pi / 2.0 - 1e-12 <= a <= math.pi / 2.0 + 1e-12:
                raise ActionRangeError(f"azimuth angle {i} = {a} rad outside [-pi/2, pi/2]")
    fx = fy = torque = 0.0
    for fi, th, alpha in zip(f, thrusters, angles + [thrusters[2].angle_fixed]):
        c, s = math.cos(alpha), math.sin(alpha)
        fx += fi * c
        fy += fi * s
        torque += fi * (th.lx * s - th.ly * c)
    return fx, fy, torque


def body_current(model: VesselModel, psi: float) -> np.ndarray:
    """Ocean current expressed in the body frame, with zero yaw component."""
    cur = rotation2(psi).T @ model.current
    return np.array([cur[0], cur[1], 0.0])


def step(
    pose: Pose,
    vel: Velocity,
    tau_kn: Sequence[float],
    h: float,
    model: VesselModel,
) -> Tuple[Pose, Velocity]:
    """One forward-Euler step of the 3-DOF equations of motion.

    eta' = R(psi) nu h + eta, nu_r' = M^-1 (tau - D nu_r) h + nu_r; the
    absolute velocity is recovered by re-adding the body-frame current at the
    updated heading.
    """
    if h <= 0.0:
        raise ValueError("step size must be positive")
    eta = np.array(pose)
    nu = np.array(vel)
    nu_r = nu - body_current(model, pose.psi)
    tau = np.asarray(tau_kn, dtype=float) * KN_TO_N
    eta_next = rotation(pose.psi) @ nu * h + eta
    nu_r_next = model.mass_inverse @ (tau - model.damping_matrix @ nu_r) * h + nu_r
    psi_next = wrap_angle(float(eta_next[2]))
    nu_next = nu_r_next + body_current(model, psi_next)
    return (
        Pose(float(eta_next[0]), float(eta_next[1]), psi_next),
        Velocity(float(nu_next[0]), float(nu_next[1]), float(nu_next[2])),
    )
