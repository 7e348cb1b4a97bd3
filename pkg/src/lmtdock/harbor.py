"""Harbor geometry: docking area, hull footprint, berth, and featurization.

The docking area, hull, and berth are convex half-plane sets {p : A p <= b}.
Leaving the docking area counts as contact; the contact test uses the hull
enlarged by the safety margin.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Tuple

import numpy as np

from .geometry import (
    clip_polygon,
    halfplane_polygon_vertices,
    rotation2,
    shoelace_area,
    wrap_angle,
)
from .vessel import Pose, Velocity

# meters; a hull vertex may sit this far outside the dock boundary and still
# count as inside
CONTACT_TOLERANCE = 1e-9

FEATURE_NAMES = (
    "x_err",
    "y_err",
    "psi_err",
    "u",
    "v",
    "r",
    "contact",
    "d_obs",
    "psi_obs",
)
CONTACT_INDEX = FEATURE_NAMES.index("contact")


class StateVector(NamedTuple):
    """The 9 features seen by the controller and the surrogate.

    x_err/y_err are the body-frame offsets to the berthing point, psi_err the
    heading error versus the berth heading, (u, v, r) the body velocities,
    contact the binary contact flag, and (d_obs, psi_obs) the distance and
    body-frame bearing to the closest point of the docking-area boundary.
    """

    x_err: float
    y_err: float
    psi_err: float
    u: float
    v: float
    r: float
    contact: float
    d_obs: float
    psi_obs: float

    def as_array(self) -> np.ndarray:
        return np.array(self, dtype=float)


@dataclass(frozen=True)
class HarborGeometry:
    dock_A: np.ndarray
    dock_b: np.ndarray
    hull_A: np.ndarray
    hull_b: np.ndarray
    berth_A: np.ndarray
    berth_b: np.ndarray
    berth_point: Pose
    hull_margin: float = 1.10

    def __post_init__(self):
        for name in ("dock", "hull", "berth"):
            A = np.asarray(getattr(self, f"{name}_A"), dtype=float)
            b = np.asarray(getattr(self, f"{name}_b"), dtype=float).reshape(-1)
            if A.ndim != 2 or A.shape[1] != 2 or A.shape[0] != b.shape[0]:
                raise ValueError(f"{name} half-planes malformed")
            object.__setattr__(self, f"{name}_A", A)
            object.__setattr__(self, f"{name}_b", b)
        if self.hull_margin < 1.0:
            raise ValueError("hull_margin must be >= 1.0")
        # raises if any set is empty or unbounded
        object.__setattr__(self, "_dock_vertices", halfplane_polygon_vertices(self.dock_A, self.dock_b))
        object.__setattr__(self, "_berth_vertices", halfplane_polygon_vertices(self.berth_A, self.berth_b))
        hull_body = halfplane_polygon_vertices(self.hull_A, self.hull_b)
        object.__setattr__(self, "_hull_body", hull_body)
        object.__setattr__(self, "_hull_body_margined", hull_body * self.hull_margin)
        object.__setattr__(self, "_dock_row_norms", np.linalg.norm(self.dock_A, axis=1))

    @property
    def dock_vertices(self) -> np.ndarray:
        return self._dock_vertices

    @property
    def berth_vertices(self) -> np.ndarray:
        return self._berth_vertices

    @property
    def hull_body_vertices(self) -> np.ndarray:
        """Body-frame hull pentagon before margin scaling."""
        return self._hull_body


def hull_vertices(pose: Pose, geom: HarborGeometry) -> np.ndarray:
    """NED vertices of the margin-enlarged hull pentagon at the given pose."""
    R = rotation2(pose.psi)
    return geom._hull_body_margined @ R.T + np.array([pose.x, pose.y])


def collision(pose: Pose, geom: HarborGeometry) -> int:
    """1 if any enlarged-hull vertex lies outside the docking area, else 0."""
    verts = hull_vertices(pose, geom)
    # signed violation in meters: (a.v - b)/|a| per plane and vertex
    violation = (verts @ geom.dock_A.T - geom.dock_b) / geom._dock_row_norms
    return int(np.max(violation) > CONTACT_TOLERANCE)


def nearest_obstacle(pose: Pose, geom: HarborGeometry) -> Tuple[float, float]:
    """Distance and body-frame bearing to the nearest dock boundary plane.

    Evaluated at the vessel origin. If the origin has left the docking area
    the distance clamps to zero and the bearing points back at the violated
    plane's foot point.
    """
    p = np.array([pose.x, pose.y])
    clearances = (geom.dock_b - geom.dock_A @ p) / geom._dock_row_norms
    i = int(np.argmin(clearances))
    c = float(clearances[i])
    a = geom.dock_A[i] / geom._dock_row_norms[i]
    direction = a if c >= 0.0 else -a
    bearing = math.atan2(direction[1], direction[0])
    return max(c, 0.0), wrap_angle(bearing - pose.psi)


def featurize(pose: Pose, vel: Velocity, geom: HarborGeometry) -> StateVector:
    """Build the 9-feature state vector from a raw pose and velocity."""
    R = rotation2(pose.psi)
    offset = np.array([geom.berth_point.x - pose.x, geom.berth_point.y - pose.y])
    err = R.T @ offset
    d_obs, psi_obs = nearest_obstacle(pose, geom)
    return StateVector(
        x_err=float(err[0]),
        y_err=float(err[1]),
        psi_err=wrap_angle(geom.berth_point.psi - pose.psi),
        u=vel.u,
        v=vel.v,
        r=vel.r,
        contact=float(collision(pose, geom)),
        d_obs=d_obs,
        psi_obs=psi_obs,
    )


def berth_overlap_area(pose: Pose, geom: HarborGeometry) -> float:
    """Area of the hull footprint intersected with the berth rectangle.

    The (margin-enlarged) hull polygon is clipped against every berth
    half-plane; the clipped polygon's area comes from the Shoelace formula.
    """
    clipped = clip_polygon(hull_vertices(pose, geom), geom.berth_A, geom.berth_b)
    return shoelace_area(clipped)
