"""Fine-stage antipodal grasp detection on instance masks.

Per instance: trace the contour (optionally jittered to model perception
error), estimate orientation with PCA, cast antipodal rays from the
centroid in directions nearly perpendicular to the major axis, and keep
contact pairs that pass fingertip clearance checking. Contacts live in
pixel coordinates (u = row, v = col); the image x-axis is the column
direction.
"""

import math
from dataclasses import dataclass

import numpy as np

from . import kernels
from .errors import (
    DegeneratePointSetError,
    EmptyInstanceError,
    FragmentedInstanceError,
    WidthOutOfRangeError,
)
from .geometry import principal_axes, trace_contour

PERP_COS_TOL = 0.1  # operationalizes exact perpendicularity on a raster
CANDIDATE_DIRECTIONS = 8  # rays spread evenly inside the tolerance cone
FINGERTIP_STANDOFF_PX = 1.25  # clears the contact's own pixel squares at any raster phase

_JITTER_TAG = 0x6A17


@dataclass(frozen=True)
class Grasp:
    """Antipodal grasp: contacts s1 = (u1, v1), s2 = (u2, v2) in pixels."""

    u1: float
    v1: float
    u2: float
    v2: float
    zeta: tuple  # ((u1+u2)/2, (v1+v2)/2), exact
    theta: float  # angle of s1->s2 vs the image x-axis, folded into [0, pi)
    width_px: float
    item_id: int
    category: int
    pressure: float

    @property
    def s1(self):
        return (self.u1, self.v1)

    @property
    def s2(self):
        return (self.u2, self.v2)

    def __post_init__(self):
        if self.zeta != (0.5 * (self.u1 + self.u2), 0.5 * (self.v1 + self.v2)):
            raise ValueError("zeta must be the exact contact midpoint")
        if not self.width_px > 0.0:
            raise ValueError("grasp width must be positive")
        if abs(self.theta - _fold_theta(self.u1, self.v1, self.u2, self.v2)) > 1e-9:
            raise ValueError("theta inconsistent with contacts")
        if not (0.0 <= self.pressure <= 1.0):
            raise ValueError("pressure must be in [0, 1]")


def _fold_theta(u1, v1, u2, v2):
    """Angle between s1->s2 and the image x-axis, in [0, pi)."""
    dv = v2 - v1
    du = u2 - u1
    norm = math.hypot(du, dv)
    theta = math.acos(max(min(dv / norm, 1.0), -1.0))
    if theta >= math.pi:
        theta = 0.0
    return theta


def pressure_from_width(width_mm, max_open_width=40.0):
    """Linear closing-pressure map: 1 at zero width, 0 at full opening."""
    if not (0.0 < width_mm <= max_open_width):
        raise WidthOutOfRangeError(
            f"width {width_mm} mm outside (0, {max_open_width}]"
        )
    return min(max(1.0 - width_mm / max_open_width, 0.0), 1.0)


def make_grasp(s1, s2, item_id, category, gripper, mm_per_px):
    """Assemble a Grasp from two pixel-space contacts."""
    u1, v1 = float(s1[0]), float(s1[1])
    u2, v2 = float(s2[0]), float(s2[1])
    width_px = math.hypot(u2 - u1, v2 - v1)
    return Grasp(
        u1=u1,
        v1=v1,
        u2=u2,
        v2=v2,
        zeta=(0.5 * (u1 + u2), 0.5 * (v1 + v2)),
        theta=_fold_theta(u1, v1, u2, v2),
        width_px=width_px,
        item_id=item_id,
        category=category,
        pressure=pressure_from_width(width_px * mm_per_px, gripper.max_open_width),
    )


def fingertip_centers(grasp, gripper, mm_per_px):
    """Fingertip disk centers placed tangent-outside each contact along the
    grasp axis, standing off by FINGERTIP_STANDOFF_PX."""
    r_tip = gripper.finger_footprint_radius / mm_per_px
    au = (grasp.u2 - grasp.u1) / grasp.width_px
    av = (grasp.v2 - grasp.v1) / grasp.width_px
    off = r_tip + FINGERTIP_STANDOFF_PX
    f1 = (grasp.u1 - au * off, grasp.v1 - av * off)
    f2 = (grasp.u2 + au * off, grasp.v2 + av * off)
    return f1, f2, r_tip


def collision_check(frame, grasp, gripper):
    """True iff both fingertip disks are free of labeled pixels (any id).

    Pixels outside the frame count as free space.
    """
    f1, f2, r_tip = fingertip_centers(grasp, gripper, frame.mm_per_px)
    inst = frame.instance_mask
    if kernels.disk_hits_label(inst, f1[0], f1[1], r_tip):
        return False
    if kernels.disk_hits_label(inst, f2[0], f2[1], r_tip):
        return False
    return True


def _jittered_contour(contour, rng, sigma):
    pts = contour.points.astype(np.float64)
    if sigma > 0.0:
        pts = pts + rng.normal(0.0, 1.0, size=pts.shape) * sigma
    return pts


def _ray_polyline_hits(xy, centroid, qx, qy):
    """Signed ray parameters where the line centroid + t*(qx, qy) crosses the
    closed polyline xy. Returns the outermost crossing on each side of the
    centroid as (t_neg, t_pos), or None if either side has no crossing."""
    a = xy
    e = np.roll(xy, -1, axis=0) - a
    d = a - centroid
    denom = qx * e[:, 1] - qy * e[:, 0]
    with np.errstate(divide="ignore", invalid="ignore"):
        t = (d[:, 0] * e[:, 1] - d[:, 1] * e[:, 0]) / denom
        s = (d[:, 0] * qy - d[:, 1] * qx) / denom
    valid = (np.abs(denom) > 1e-12) & (s >= 0.0) & (s < 1.0)
    t_pos = t[valid & (t > 1e-9)]
    t_neg = t[valid & (t < -1e-9)]
    if t_pos.size == 0 or t_neg.size == 0:
        return None
    return float(t_neg.min()), float(t_pos.max())


def iter_candidates(frame, gripper, contour_jitter_sigma=0.0, seed=0):
    """Candidate contact pairs shared by the detector and its test oracle.

    Contacts are exact crossings of centroid rays with the contour polyline,
    so they carry subpixel coordinates. Every returned pair already satisfies
    the perpendicularity constraint and the opening-width bound; clearance
    checking is the caller's business. Deterministic given seed.
    """
    rng = np.random.default_rng(
        np.random.SeedSequence([int(seed), _JITTER_TAG])
    )
    inst = frame.instance_mask
    sem = frame.semantic_mask
    max_width_px = gripper.max_open_width / frame.mm_per_px
    # shrink keeps boundary rays under the tolerance after float rounding
    half_cone = math.asin(0.99999 * PERP_COS_TOL)
    out = []
    for iid in frame.instance_ids():
        try:
            contour = trace_contour(inst, iid)
        except (EmptyInstanceError, FragmentedInstanceError):
            continue
        pts = _jittered_contour(contour, rng, contour_jitter_sigma)
        # PCA in (x, y) = (col, row)
        xy = np.column_stack([pts[:, 1], pts[:, 0]])
        try:
            axes = principal_axes(xy)
        except DegeneratePointSetError:
            continue
        first = np.argwhere(inst == iid)[0]
        category = int(sem[first[0], first[1]])
        centroid = xy.mean(axis=0)
        p_angle = axes.major.angle()
        seen = set()
        for k in range(CANDIDATE_DIRECTIONS):
            delta = -half_cone + (2.0 * half_cone) * k / (CANDIDATE_DIRECTIONS - 1)
            ang = p_angle + 0.5 * math.pi + delta
            qx, qy = math.cos(ang), math.sin(ang)
            hits = _ray_polyline_hits(xy, centroid, qx, qy)
            if hits is None:
                continue
            t1, t2 = hits
            # (u, v) = (row, col) = (y, x)
            s1 = (centroid[1] + t1 * qy, centroid[0] + t1 * qx)
            s2 = (centroid[1] + t2 * qy, centroid[0] + t2 * qx)
            du, dv = s2[0] - s1[0], s2[1] - s1[1]
            width = math.hypot(du, dv)
            if width <= 0.0 or width > max_width_px:
                continue
            # exact perpendicularity constraint on the emitted pair
            cosang = abs(axes.major.x * dv + axes.major.y * du) / width
            if cosang > PERP_COS_TOL:
                continue
            key = (round(s1[0], 9), round(s1[1], 9), round(s2[0], 9), round(s2[1], 9))
            if key in seen:
                continue
            seen.add(key)
            out.append((iid, category, s1, s2))
    return out


def clutter_score(frame, grasp, gripper):
    """Labeled-pixel count in the clearance annulus around the grasp center."""
    r_tip = gripper.finger_footprint_radius / frame.mm_per_px
    r_in = 0.5 * grasp.width_px
    r_out = r_in + 2.0 * r_tip
    return kernels.annulus_label_count(
        frame.instance_mask, grasp.zeta[0], grasp.zeta[1], r_in, r_out
    )


def detect_grasps(frame, gripper, contour_jitter_sigma=0.0, seed=0):
    """All clearance-passing antipodal grasps, least cluttered first.

    An empty list means no feasible grasp (the caller's cue to singulate).
    """
    grasps = []
    for iid, category, s1, s2 in iter_candidates(
        frame, gripper, contour_jitter_sigma, seed
    ):
        g = make_grasp(s1, s2, iid, category, gripper, frame.mm_per_px)
        if collision_check(frame, g, gripper):
            grasps.append(g)
    grasps.sort(
        key=lambda g: (
            clutter_score(frame, g, gripper),
            g.item_id,
            g.width_px,
            g.u1,
            g.v1,
            g.u2,
            g.v2,
        )
    )
    return grasps


def grasps_to_csv(grasps, path):
    """Write grasps as CSV with a fixed header."""
    with open(path, "w") as f:
        f.write(
            "item_id,category,u1,v1,u2,v2,zeta_u,zeta_v,theta_rad,width_px,pressure\n"
        )
        for g in grasps:
            f.write(
                f"{g.item_id},{g.category},{g.u1:.17g},{g.v1:.17g},"
                f"{g.u2:.17g},{g.v2:.17g},{g.zeta[0]:.17g},{g.zeta[1]:.17g},"
                f"{g.theta:.17g},{g.width_px:.17g},{g.pressure:.17g}\n"
            )
