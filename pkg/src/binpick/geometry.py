"""Planar geometry primitives: vectors, poses, contour tracing, principal
axes, and nearest-pair search.

Pixel coordinates are (row, col) with row growing along +y; when an angle
or axis is involved, x = col and y = row. World coordinates are millimeters.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    DegeneratePointSetError,
    EmptyInstanceError,
    FragmentedInstanceError,
    TooFewItemsError,
)

TWO_PI = 2.0 * math.pi


@dataclass(frozen=True)
class Vec2:
    """Point or displacement in millimeters."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite Vec2 components: ({self.x}, {self.y})")

    def __add__(self, other):
        return Vec2(self.x + other.x, self.y + other.y)

    def __sub__(self, other):
        return Vec2(self.x - other.x, self.y - other.y)

    def scaled(self, s):
        return Vec2(self.x * s, self.y * s)

    def norm(self):
        return math.hypot(self.x, self.y)

    def dist(self, other):
        return math.hypot(self.x - other.x, self.y - other.y)

    def as_array(self):
        return np.array([self.x, self.y], dtype=np.float64)


@dataclass(frozen=True)
class UnitVec2:
    """Unit direction vector (dimensionless)."""

    x: float
    y: float

    def __post_init__(self):
        n = self.x * self.x + self.y * self.y
        if abs(n - 1.0) > 2e-9:
            raise ValueError(f"not a unit vector: ({self.x}, {self.y}), |v|^2 = {n}")

    @staticmethod
    def from_components(x, y):
        n = math.hypot(x, y)
        if n == 0.0:
            raise ValueError("cannot normalize zero vector")
        return UnitVec2(x / n, y / n)

    @staticmethod
    def from_angle(theta):
        return UnitVec2(math.cos(theta), math.sin(theta))

    def perp(self):
        """Rotate by +90 degrees."""
        return UnitVec2(-self.y, self.x)

    def dot(self, other):
        return self.x * other.x + self.y * other.y

    def angle(self):
        return math.atan2(self.y, self.x)


def normalize_angle(theta):
    """Fold an angle into [0, 2*pi)."""
    t = math.fmod(theta, TWO_PI)
    if t < 0.0:
        t += TWO_PI
    if t >= TWO_PI:  # fmod can round back up to 2*pi
        t -= TWO_PI
    return t


@dataclass(frozen=True)
class Pose2:
    """Planar pose: position in mm, heading normalized to [0, 2*pi)."""

    position: Vec2
    theta: float = 0.0

    def __post_init__(self):
        object.__setattr__(self, "theta", normalize_angle(self.theta))


@dataclass
class Contour:
    """Closed pixel boundary, (row, col) points in traversal order."""

    points: np.ndarray  # (N, 2) int32

    def __len__(self):
        return len(self.points)

    def signed_area(self):
        """Shoelace area with x = col, y = row; positive means CCW."""
        x = self.points[:, 1].astype(np.float64)
        y = self.points[:, 0].astype(np.float64)
        return 0.5 * float(np.sum(x * np.roll(y, -1) - np.roll(x, -1) * y))


@dataclass(frozen=True)
class PrincipalAxes:
    """Mean center and orthogonal unit eigenvectors, eigenvalues[0] >= [1]."""

    center: Vec2
    major: UnitVec2
    minor: UnitVec2
    eigenvalues: tuple


def trace_contour(mask, instance_id):
    """Trace the closed outer boundary of one labeled instance.

    The boundary is the set of instance pixels with a 4-adjacent background
    or out-of-bounds pixel, returned as a closed 8-connected walk oriented
    counter-clockwise (positive shoelace area with x = col, y = row) and
    starting at the lexicographically smallest instance pixel. Raises
    EmptyInstanceError for instances under 3 pixels and
    FragmentedInstanceError when the pixels are not one 8-connected
    component.
    """
    mask = np.ascontiguousarray(mask, dtype=np.int32)
    pixels = np.argwhere(mask == instance_id)  # sorted row-major
    n = len(pixels)
    if n < 3:
        raise EmptyInstanceError(f"instance {instance_id} has {n} pixels (< 3)")
    sr, sc = int(pixels[0, 0]), int(pixels[0, 1])
    if kernels.flood_size(mask, int(instance_id), sr, sc) != n:
        raise FragmentedInstanceError(
            f"instance {instance_id} splits into multiple 8-connected components"
        )
    rmin, cmin = pixels.min(axis=0)
    rmax, cmax = pixels.max(axis=0)
    pts = kernels.trace_boundary(
        mask, int(instance_id), sr, sc, n, int(rmin), int(cmin), int(rmax), int(cmax)
    )
    contour = Contour(points=pts)
    if contour.signed_area() < 0.0:
        flipped = np.concatenate([pts[:1], pts[1:][::-1]])
        contour = Contour(points=np.ascontiguousarray(flipped))
    return contour


def principal_axes(points):
    """Population-covariance PCA of 2D points given as (x, y) rows.

    The major axis sign is fixed to x > 0, or y > 0 when x == 0; the minor
    axis is the major rotated by +90 degrees.
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2:
        raise ValueError("expected an (N, 2) point array")
    if len(np.unique(pts, axis=0)) < 2:
        raise DegeneratePointSetError("need at least 2 distinct points")
    center = pts.mean(axis=0)
    d = pts - center
    n = len(pts)
    a = float(d[:, 0] @ d[:, 0]) / n
    b = float(d[:, 0] @ d[:, 1]) / n
    c = float(d[:, 1] @ d[:, 1]) / n
    # closed-form eigensolve of [[a, b], [b, c]]
    half_trace = 0.5 * (a + c)
    disc = math.sqrt(max(0.25 * (a - c) ** 2 + b * b, 0.0))
    lam1 = half_trace + disc
    lam2 = max(half_trace - disc, 0.0)
    if b == 0.0:
        vx, vy = (1.0, 0.0) if a >= c else (0.0, 1.0)
    else:
        # pick the better-conditioned eigenvector branch
        if abs(lam1 - c) >= abs(lam1 - a):
            vx, vy = lam1 - c, b
        else:
            vx, vy = b, lam1 - a
    norm = math.hypot(vx, vy)
    vx, vy = vx / norm, vy / norm
    if vx < 0.0 or (vx == 0.0 and vy < 0.0):
        vx, vy = -vx, -vy
    if vx == 0.0:
        vx = 0.0  # squash -0.0
    major = UnitVec2(vx, vy)
    return PrincipalAxes(
        center=Vec2(float(center[0]), float(center[1])),
        major=major,
        minor=major.perp(),
        eigenvalues=(lam1, lam2),
    )


def point_segment_distance(p, a, b):
    """Distance from point p to segment [a, b], all Vec2 in mm."""
    ab = b - a
    denom = ab.x * ab.x + ab.y * ab.y
    if denom == 0.0:
        return p.dist(a)
    t = ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / denom
    t = min(max(t, 0.0), 1.0)
    return p.dist(Vec2(a.x + t * ab.x, a.y + t * ab.y))


def convex_polygon_point_distance(verts_xy, px, py):
    """Signed distance from (px, py) to a CCW convex polygon, negative inside.

    verts_xy is an (N, 2) array of (x, y) vertices.
    """
    v = np.asarray(verts_xy, dtype=np.float64)
    n = len(v)
    if n < 3:
        raise ValueError("polygon needs at least 3 vertices")
    nxt = np.roll(v, -1, axis=0)
    ex, ey = nxt[:, 0] - v[:, 0], nxt[:, 1] - v[:, 1]
    cross = ex * (py - v[:, 1]) - ey * (px - v[:, 0])
    inside = bool(np.all(cross >= 0.0))
    # min distance to the edge segments
    denom = ex * ex + ey * ey
    t = np.clip(((px - v[:, 0]) * ex + (py - v[:, 1]) * ey) / denom, 0.0, 1.0)
    dx = px - (v[:, 0] + t * ex)
    dy = py - (v[:, 1] + t * ey)
    d = float(np.sqrt(np.min(dx * dx + dy * dy)))
    return -d if inside else d


def closest_pair(centers):
    """Indices (i, j) with i < j of the closest pair, plus their distance.

    Ties resolve to the lexicographically smallest (i, j).
    """
    pts = np.asarray(centers, dtype=np.float64)
    n = len(pts)
    if n < 2:
        raise TooFewItemsError("closest_pair needs at least 2 centers")
    best = (-1, -1)
    best_d2 = math.inf
    for i in range(n - 1):
        dx = pts[i + 1 :, 0] - pts[i, 0]
        dy = pts[i + 1 :, 1] - pts[i, 1]
        d2 = dx * dx + dy * dy
        j_rel = int(np.argmin(d2))
        if d2[j_rel] < best_d2:
            best_d2 = float(d2[j_rel])
            best = (i, i + 1 + j_rel)
    return best[0], best[1], math.sqrt(best_d2)
