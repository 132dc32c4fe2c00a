"""Geometry primitives on the surface of a sphere.

All functions are vectorised over leading axes: points are arrays of shape
(..., 3).  Angles use atan2 forms throughout so that small distances, areas
and angles are well conditioned (no arccos of a near-unit dot product).
Signed areas follow the right-hand rule about the outward normal: a polygon
traversed counterclockwise when viewed from outside the sphere has positive
area.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import InvalidPolygon

__all__ = [
    "SpherePoint",
    "TangentVector",
    "unit",
    "geodesic_distance",
    "spherical_triangle_area",
    "spherical_polygon_area",
    "exp_map",
    "tangent_basis",
]

# Above this |z-alignment| the z-axis cross product degrades; switch axes.
_POLE_ALIGNMENT = 0.99


def unit(v: np.ndarray) -> np.ndarray:
    """Normalise vectors along the last axis."""
    v = np.asarray(v, dtype=float)
    n = np.linalg.norm(v, axis=-1, keepdims=True)
    return v / n


def geodesic_distance(p: np.ndarray, q: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Great-circle distance between points on a sphere of the given radius.

    Uses atan2(|p x q|, p . q), accurate for nearby and antipodal points
    alike; the result is in [0, pi * radius].
    """
    ph = unit(p)
    qh = unit(q)
    cross = np.cross(ph, qh)
    sin_a = np.linalg.norm(cross, axis=-1)
    cos_a = np.sum(ph * qh, axis=-1)
    return radius * np.arctan2(sin_a, cos_a)


def spherical_triangle_area(p1, p2, p3, radius: float = 1.0) -> np.ndarray:
    """Signed area of the spherical triangle (p1, p2, p3).

    Positive when the vertices run counterclockwise seen from outside the
    sphere.  The signed excess is computed with the atan2 form

        E = 2 atan2(p1 . (p2 x p3), 1 + p1.p2 + p2.p3 + p3.p1)

    which stays accurate for tiny triangles (no cancellation of near-pi
    angle sums) and carries the orientation in the sign of the numerator.
    """
    p1 = unit(p1)
    p2 = unit(p2)
    p3 = unit(p3)
    num = np.sum(p1 * np.cross(p2, p3), axis=-1)
    den = 1.0 + np.sum(p1 * p2, axis=-1) + np.sum(p2 * p3, axis=-1) + np.sum(p3 * p1, axis=-1)
    return 2.0 * np.arctan2(num, den) * radius * radius


def spherical_polygon_area(vertices: np.ndarray, interior_hint: np.ndarray,
                           radius: float = 1.0) -> float:
    """Signed area of a spherical polygon from an ordered vertex list.

    The polygon is fanned into triangles from ``interior_hint`` (any point
    inside, e.g. the normalised vertex mean); signed excesses are summed so
    the result is correct for non-convex polygons.  Counterclockwise
    traversal viewed from outside gives positive area.
    """
    vertices = np.asarray(vertices, dtype=float)
    if vertices.ndim != 2 or vertices.shape[0] < 3:
        raise InvalidPolygon(f"polygon needs >= 3 vertices, got shape {vertices.shape}")
    hint = unit(np.asarray(interior_hint, dtype=float))
    v = unit(vertices)
    nxt = np.roll(v, -1, axis=0)
    return float(np.sum(spherical_triangle_area(hint, v, nxt, radius)))


def exp_map(base: np.ndarray, direction: np.ndarray, radius: float = 1.0) -> np.ndarray:
    """Walk a geodesic from ``base`` along a tangent ``direction``.

    The arc length travelled is |direction|; a zero direction returns the
    base point bit-for-bit.  Inputs broadcast over leading axes; the result
    is renormalised onto the sphere.
    """
    base = np.asarray(base, dtype=float)
    direction = np.asarray(direction, dtype=float)
    b, d = np.broadcast_arrays(base, direction)
    mag = np.linalg.norm(d, axis=-1, keepdims=True)
    moved = mag[..., 0] > 0.0
    theta = mag / radius
    with np.errstate(invalid="ignore", divide="ignore"):
        dhat = np.where(moved[..., None], d / mag, 0.0)
    out = np.cos(theta) * b + np.sin(theta) * radius * dhat
    out = radius * unit(out)
    return np.where(moved[..., None], out, b)


def tangent_basis(p: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Right-handed orthonormal tangent basis (e1, e2) at each point.

    e1 = normalize(p x z) away from the poles, switching to p x x when the
    point is nearly parallel to z; e2 = n x e1 so that e1 x e2 is the
    outward normal.
    """
    n = unit(p)
    zaligned = np.abs(n[..., 2]) > _POLE_ALIGNMENT
    axis = np.where(zaligned[..., None],
                    np.array([1.0, 0.0, 0.0]),
                    np.array([0.0, 0.0, 1.0]))
    e1 = unit(np.cross(n, axis))
    e2 = np.cross(n, e1)
    return e1, e2


@dataclass
class SpherePoint:
    """A point constrained to a sphere; the position is renormalised on
    construction so |position| = radius always holds."""

    position: np.ndarray
    radius: float = 1.0

    def __post_init__(self):
        pos = np.asarray(self.position, dtype=float)
        if pos.shape != (3,):
            raise ValueError(f"position must have shape (3,), got {pos.shape}")
        self.position = self.radius * unit(pos)

    def distance_to(self, other: "SpherePoint") -> float:
        return float(geodesic_distance(self.position, other.position, self.radius))


@dataclass
class TangentVector:
    """A vector in the tangent plane of a sphere point.

    Any radial component of ``direction`` is projected out on construction,
    so direction . position == 0 to round-off afterwards.
    """

    base: SpherePoint
    direction: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self):
        d = np.asarray(self.direction, dtype=float)
        if d.shape != (3,):
            raise ValueError(f"direction must have shape (3,), got {d.shape}")
        nhat = self.base.position / self.base.radius
        self.direction = d - np.dot(d, nhat) * nhat

    @property
    def magnitude(self) -> float:
        return float(np.linalg.norm(self.direction))

    def transport(self) -> SpherePoint:
        """Destination of the geodesic of length |direction| from base."""
        dest = exp_map(self.base.position, self.direction, self.base.radius)
        return SpherePoint(dest, self.base.radius)
