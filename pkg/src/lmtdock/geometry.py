"""Planar geometry primitives: angles, rotations, convex half-plane sets.

Conventions: NED world frame (x north, y east, yaw positive north-to-east),
body frame fixed to the vessel (x surge forward, y sway starboard). Convex
regions are intersections of half-planes {p : A p <= b}.
"""

from __future__ import annotations

import math

import numpy as np

TWO_PI = 2.0 * math.pi


def wrap_angle(a: float) -> float:
    """Wrap an angle to (-pi, pi]."""
    a = math.fmod(a, TWO_PI)
    if a > math.pi:
        a -= TWO_PI
    elif a <= -math.pi:
        a += TWO_PI
    return a


def rotation(psi: float) -> np.ndarray:
    """3x3 planar rotation with the yaw slot passed through unchanged."""
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def rotation2(psi: float) -> np.ndarray:
    """2x2 rotation taking body-frame coordinates to NED."""
    c, s = math.cos(psi), math.sin(psi)
    return np.array([[c, -s], [s, c]])


def halfplane_polygon_vertices(A: np.ndarray, b: np.ndarray, tol: float = 1e-7) -> np.ndarray:
    """Enumerate the vertices of the bounded region {p : A p <= b}.

    Vertices come from pairwise plane intersections that satisfy every
    constraint (to a scale-aware tolerance), deduplicated and ordered
    counter-clockwise. Raises ValueError if the region is empty or unbounded
    (fewer than 3 vertices).
    """
    A = np.asarray(A, dtype=float)
    b = np.asarray(b, dtype=float)
    m = A.shape[0]
    scale = max(1.0, float(np.max(np.abs(b))))
    pts = []
    for i in range(m):
        for j in range(i + 1, m):
            M = np.array([A[i], A[j]])
            det = M[0, 0] * M[1, 1] - M[0, 1] * M[1, 0]
            if abs(det) < 1e-12:
                continue
            p = np.linalg.solve(M, np.array([b[i], b[j]]))
            if np.all(A @ p - b <= tol * scale):
                pts.append(p)
    if not pts:
        raise ValueError("half-plane set has no vertices (empty or degenerate)")
    pts = np.array(pts)
    # dedupe within tolerance
    keep = []
    for p in pts:
        if not any(np.hypot(*(p - q)) < tol * scale for q in keep):
            keep.append(p)
    if len(keep) < 3:
        raise ValueError("half-plane set is not a bounded polygon")
    verts = np.array(keep)
    centroid = verts.mean(axis=0)
    ang = np.arctan2(verts[:, 1] - centroid[1], verts[:, 0] - centroid[0])
    return verts[np.argsort(ang)]


def clip_polygon_halfplane(poly: np.ndarray, a: np.ndarray, b: float) -> np.ndarray:
    """Clip a convex polygon against one half-plane {p : a.p <= b}."""
    n = len(poly)
    if n == 0:
        return poly
    d = poly @ a - b
    out = []
    for i in range(n):
        j = (i + 1) % n
        pi, pj = poly[i], poly[j]
        di, dj = d[i], d[j]
        if di <= 0.0:
            out.append(pi)
            if dj > 0.0:
                t = di / (di - dj)
                out.append(pi + t * (pj - pi))
        elif dj <= 0.0:
            t = di / (di - dj)
            out.append(pi + t * (pj - pi))
    return np.array(out) if out else np.empty((0, 2))


def clip_polygon(poly: np.ndarray, A: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Clip a convex polygon against every half-plane of {p : A p <= b}."""
    out = np.asarray(poly, dtype=float)
    for a_row, b_row in zip(np.asarray(A, dtype=float), np.asarray(b, dtype=float)):
        out = clip_polygon_halfplane(out, a_row, float(b_row))
        if len(out) == 0:
            break
    return out


def shoelace_area(poly: np.ndarray) -> float:
    """Area of a simple polygon given its ordered vertices."""
    if len(poly) < 3:
        return 0.0
    x = poly[:, 0]
    y = poly[:, 1]
    return 0.5 * abs(float(np.dot(x, np.roll(y, -1)) - np.dot(y, np.roll(x, -1))))
