"""Scene state and dynamics: items in a walled bin/tray workspace,
rasterized sensing, and the quasistatic push/grab model.

Model assumptions, stated once:
  - Items translate only (no rotation under pushing).
  - Push and placement dynamics treat every shape as its bounding disk
    around pose.position; rasterization uses the true shape. The bounding
    disk is conservative, so maintaining disk separation guarantees the
    true shapes never interpenetrate.
  - Pushing is quasistatic and friction-free: items displace by the
    minimal translation that clears the gripper corridor, then pairwise
    overlaps are resolved by iterative projection. Regions are walled;
    items clamp at walls.
"""

import dataclasses
import json
import math
from dataclasses import dataclass
from enum import Enum

import numpy as np

from . import kernels
from .errors import (
    EmptyRegionError,
    NoItemsError,
    NonConvergenceError,
    PlacementFailureError,
)
from .geometry import Pose2, UnitVec2, Vec2, normalize_angle, point_segment_distance

PENETRATION_TOL = 1e-6  # mm
RESOLVE_MAX_ITER = 100
TIE_EPS = 1e-9  # mm; below this an item counts as exactly on a push line

DISK_RADIUS_MIN = 0.6  # object widths span 1.2 mm .. 25 mm
DISK_RADIUS_MAX = 12.5


class Location(Enum):
    IN_BIN = "in_bin"
    ON_TRAY = "on_tray"
    PLACED = "placed"
    HELD = "held"  # transient, between grab_at and place_on_tray


@dataclass(frozen=True)
class Disk:
    radius: float  # mm

    def __post_init__(self):
        if not (DISK_RADIUS_MIN <= self.radius <= DISK_RADIUS_MAX):
            raise ValueError(
                f"disk radius {self.radius} mm outside "
                f"[{DISK_RADIUS_MIN}, {DISK_RADIUS_MAX}]"
            )

    @property
    def bounding_radius(self):
        return self.radius


@dataclass(frozen=True)
class ConvexPolygon:
    """Convex CCW polygon in the body frame; pose.position is its anchor."""

    vertices: tuple  # of Vec2

    def __post_init__(self):
        if len(self.vertices) < 3:
            raise ValueError("polygon needs at least 3 vertices")
        v = self.vertices
        n = len(v)
        area2 = 0.0
        for i in range(n):
            a, b, c = v[i], v[(i + 1) % n], v[(i + 2) % n]
            cross = (b.x - a.x) * (c.y - b.y) - (b.y - a.y) * (c.x - b.x)
            if cross <= 0.0:
                raise ValueError("polygon must be strictly convex and CCW")
            area2 += a.x * b.y - b.x * a.y
        if area2 <= 0.0:
            raise ValueError("polygon must be CCW with positive area")

    @property
    def bounding_radius(self):
        return max(v.norm() for v in self.vertices)


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle in world mm, [x0, x1] x [y0, y1]."""

    x0: float
    y0: float
    x1: float
    y1: float

    def __post_init__(self):
        if not (self.x1 > self.x0 and self.y1 > self.y0):
            raise ValueError("rectangle must have positive extent")

    @property
    def width(self):
        return self.x1 - self.x0

    @property
    def height(self):
        return self.y1 - self.y0

    @property
    def center(self):
        return Vec2(0.5 * (self.x0 + self.x1), 0.5 * (self.y0 + self.y1))

    def contains(self, p, margin=0.0):
        return (
            self.x0 + margin <= p.x <= self.x1 - margin
            and self.y0 + margin <= p.y <= self.y1 - margin
        )

    def clamp(self, p, margin=0.0):
        return Vec2(
            min(max(p.x, self.x0 + margin), self.x1 - margin),
            min(max(p.y, self.y0 + margin), self.y1 - margin),
        )

    def overlaps(self, other):
        return not (
            self.x1 <= other.x0
            or other.x1 <= self.x0
            or self.y1 <= other.y0
            or other.y1 <= self.y0
        )


@dataclass(frozen=True)
class Workspace:
    bin_region: Rect
    tray_region: Rect
    place_region: Rect

    def __post_init__(self):
        regions = [self.bin_region, self.tray_region, self.place_region]
        for i in range(3):
            for j in range(i + 1, 3):
                if regions[i].overlaps(regions[j]):
                    raise ValueError("workspace regions must be pairwise disjoint")

    def region_of(self, location):
        if location is Location.IN_BIN:
            return self.bin_region
        if location is Location.ON_TRAY:
            return self.tray_region
        if location is Location.PLACED:
            return self.place_region
        raise ValueError(f"no region for location {location}")


def default_workspace():
    return Workspace(
        bin_region=Rect(0.0, 0.0, 300.0, 300.0),
        tray_region=Rect(320.0, 0.0, 520.0, 200.0),
        place_region=Rect(320.0, 220.0, 470.0, 370.0),
    )


@dataclass(frozen=True)
class Item:
    id: int
    category: int
    shape: object  # Disk or ConvexPolygon
    pose: Pose2
    location: Location

    def __post_init__(self):
        if self.id < 1:
            raise ValueError("item id must be >= 1 (0 is raster background)")
        if self.category < 1:
            raise ValueError("category must be >= 1 (0 is raster background)")

    @property
    def center(self):
        return self.pose.position

    @property
    def bounding_radius(self):
        return self.shape.bounding_radius

    def world_vertices(self):
        """Polygon vertices in world coordinates as (N, 2) float64 (x, y)."""
        if not isinstance(self.shape, ConvexPolygon):
            raise TypeError("world_vertices is only defined for polygons")
        c, s = math.cos(self.pose.theta), math.sin(self.pose.theta)
        body = np.array([[v.x, v.y] for v in self.shape.vertices])
        rot = body @ np.array([[c, s], [-s, c]])
        return rot + np.array([self.pose.position.x, self.pose.position.y])


@dataclass(frozen=True)
class Gripper:
    finger_footprint_radius: float = 2.0  # mm, virtual fingertip disk
    max_open_width: float = 40.0  # mm
    closed_body: tuple = (10.0, 4.0)  # length x width, mm, for pushing
    capture_radius: float = 6.0  # mm, default rough-grasp capture
    blade_width: float = 12.0  # mm, break-off plow width

    def __post_init__(self):
        vals = (
            self.finger_footprint_radius,
            self.max_open_width,
            self.closed_body[0],
            self.closed_body[1],
            self.capture_radius,
            self.blade_width,
        )
        if any(v <= 0.0 for v in vals):
            raise ValueError("gripper dimensions must be positive")
        if self.max_open_width <= 2.0 * self.finger_footprint_radius:
            raise ValueError("max_open_width must exceed the two fingertip disks")


@dataclass(frozen=True)
class FingerOpen:
    at: Vec2
    axis: UnitVec2
    opening: float  # mm

    def __post_init__(self):
        if self.opening <= 0.0:
            raise ValueError("opening must be positive")


@dataclass(frozen=True)
class PushAction:
    start: Vec2
    end: Vec2
    gripper_theta: float
    finger_open: object = None  # FingerOpen or None

    def __post_init__(self):
        object.__setattr__(self, "gripper_theta", normalize_angle(self.gripper_theta))
        length = self.start.dist(self.end)
        if length == 0.0 and self.finger_open is None:
            raise ValueError("zero-length push needs a finger_open event")
        if self.finger_open is not None and length > 0.0:
            if point_segment_distance(self.finger_open.at, self.start, self.end) > 1e-6:
                raise ValueError("finger_open.at must lie on the push segment")


def _clone_rng(rng):
    g = np.random.default_rng()
    g.bit_generator.state = rng.bit_generator.state
    return g


@dataclass
class WorldState:
    """One trial's mutable scene; owns its RNG so trials stay independent."""

    items: list
    workspace: Workspace
    rng_seed: int
    step_counter: int = 0
    rng: object = None

    def __post_init__(self):
        if self.rng_seed < 0:
            raise ValueError("rng_seed must be non-negative")
        ids = [it.id for it in self.items]
        if len(set(ids)) != len(ids):
            raise ValueError("item ids must be unique")
        if self.rng is None:
            self.rng = np.random.default_rng(np.random.SeedSequence([self.rng_seed]))

    def copy(self):
        return WorldState(
            items=list(self.items),
            workspace=self.workspace,
            rng_seed=self.rng_seed,
            step_counter=self.step_counter,
            rng=_clone_rng(self.rng),
        )

    def item(self, item_id):
        for it in self.items:
            if it.id == item_id:
                return it
        raise KeyError(f"no item with id {item_id}")

    def items_at(self, location):
        return [it for it in self.items if it.location is location]

    def count_at(self, location):
        return sum(1 for it in self.items if it.location is location)

    def replace_item(self, item_id, **changes):
        self.items = [
            dataclasses.replace(it, **changes) if it.id == item_id else it
            for it in self.items
        ]

    def validate(self):
        """Check the non-overlap and in-region invariants; raise on violation."""
        for it in self.items:
            if it.location is Location.HELD:
                continue
            region = self.workspace.region_of(it.location)
            if not region.contains(it.center):
                raise AssertionError(f"item {it.id} center outside its region")
        by_loc = {}
        for it in self.items:
            if it.location is not Location.HELD:
                by_loc.setdefault(it.location, []).append(it)
        for group in by_loc.values():
            for i in range(len(group)):
                for j in range(i + 1, len(group)):
                    a, b = group[i], group[j]
                    gap = a.center.dist(b.center) - a.bounding_radius - b.bounding_radius
                    if gap < -PENETRATION_TOL:
                        raise AssertionError(
                            f"items {a.id} and {b.id} interpenetrate by {-gap:.3g} mm"
                        )


@dataclass
class RasterFrame:
    """Simulated sensing product: instance and semantic masks over a region.

    origin is the world position of pixel (0, 0)'s center; pixel (r, c)
    center sits at origin + (c * mm_per_px, r * mm_per_px), so rows map to
    +y and columns to +x.
    """

    mm_per_px: float
    origin: Vec2
    instance_mask: np.ndarray  # (H, W) int32, 0 = background
    semantic_mask: np.ndarray  # (H, W) int32, 0 = background

    @property
    def height(self):
        return self.instance_mask.shape[0]

    @property
    def width(self):
        return self.instance_mask.shape[1]

    def world_to_px(self, p):
        """World mm -> fractional (row, col)."""
        return (
            (p.y - self.origin.y) / self.mm_per_px,
            (p.x - self.origin.x) / self.mm_per_px,
        )

    def px_to_world(self, row, col):
        return Vec2(
            self.origin.x + col * self.mm_per_px,
            self.origin.y + row * self.mm_per_px,
        )

    def instance_ids(self):
        ids = np.unique(self.instance_mask)
        return [int(i) for i in ids if i != 0]


def rasterize(world, region, mm_per_px):
    """Render the items of one workspace region into a RasterFrame.

    A pixel gets the id of the item covering its center. Items are painted
    in ascending id order and earlier labels win, which only matters for
    transient states that violate the non-overlap invariant.
    """
    if mm_per_px <= 0.0:
        raise ValueError("mm_per_px must be positive")
    ws = world.workspace
    for location in (Location.IN_BIN, Location.ON_TRAY, Location.PLACED):
        if region == ws.region_of(location):
            break
    else:
        raise ValueError("region is not one of the workspace regions")
    w_px = int(round(region.width / mm_per_px))
    h_px = int(round(region.height / mm_per_px))
    if w_px < 1 or h_px < 1:
        raise EmptyRegionError("region smaller than one pixel at this resolution")
    inst = np.zeros((h_px, w_px), dtype=np.int32)
    sem = np.zeros((h_px, w_px), dtype=np.int32)
    origin = Vec2(region.x0 + 0.5 * mm_per_px, region.y0 + 0.5 * mm_per_px)
    frame = RasterFrame(mm_per_px=mm_per_px, origin=origin, instance_mask=inst, semantic_mask=sem)
    for it in sorted(world.items_at(location), key=lambda i: i.id):
        if isinstance(it.shape, Disk):
            row, col = frame.world_to_px(it.center)
            kernels.paint_disk(inst, sem, it.id, it.category, row, col, it.shape.radius / mm_per_px)
        else:
            verts = it.world_vertices()
            vrows = np.ascontiguousarray((verts[:, 1] - origin.y) / mm_per_px)
            vcols = np.ascontiguousarray((verts[:, 0] - origin.x) / mm_per_px)
            kernels.paint_convex_polygon(inst, sem, it.id, it.category, vrows, vcols)
    return frame


def _closest_point_on_segment(p, a, b):
    ab = b - a
    denom = ab.x * ab.x + ab.y * ab.y
    if denom == 0.0:
        return a
    t = ((p.x - a.x) * ab.x + (p.y - a.y) * ab.y) / denom
    t = min(max(t, 0.0), 1.0)
    return Vec2(a.x + t * ab.x, a.y + t * ab.y)


def _resolve_overlaps(centers, radii, region, ids):
    """Iterative pairwise projection until no pair overlaps; clamps at walls.

    Mutates `centers` (dict id -> Vec2). Raises NonConvergence past the
    iteration cap.
    """
    order = sorted(ids)
    for _ in range(RESOLVE_MAX_ITER):
        worst = 0.0
        for i in range(len(order)):
            for j in range(i + 1, len(order)):
                a, b = order[i], order[j]
                ca, cb = centers[a], centers[b]
                need = radii[a] + radii[b]
                d = cb - ca
                dist = d.norm()
                overlap = need - dist
                if overlap <= PENETRATION_TOL:
                    continue
                worst = max(worst, overlap)
                if dist < TIE_EPS:
                    ang = ((a * 7919 + b * 104729) % 360) * math.pi / 180.0
                    direction = Vec2(math.cos(ang), math.sin(ang))
                else:
                    direction = Vec2(d.x / dist, d.y / dist)
                shift = 0.5 * overlap
                centers[a] = region.clamp(
                    ca - direction.scaled(shift), radii[a]
                )
                centers[b] = region.clamp(
                    cb + direction.scaled(shift), radii[b]
                )
        if worst <= PENETRATION_TOL:
            return
    raise NonConvergenceError(
        f"overlap resolution did not converge in {RESOLVE_MAX_ITER} iterations"
    )


def apply_push(world, action, gripper):
    """Quasistatic push: corridor ejection, optional finger-open spread,
    then pairwise overlap resolution with wall clamping.

    The acting region is the workspace region containing the push path;
    only items located there move. Deterministic: no RNG involved.
    """
    ws = world.workspace
    for location in (Location.ON_TRAY, Location.IN_BIN):
        region = ws.region_of(location)
        if region.contains(action.start) and region.contains(action.end):
            break
    else:
        raise ValueError("push path must lie inside the bin or tray region")

    out = world.copy()
    out.step_counter += 1
    acted = sorted(out.items_at(location), key=lambda i: i.id)
    if not acted:
        return out
    centers = {it.id: it.center for it in acted}
    radii = {it.id: it.bounding_radius for it in acted}
    ids = [it.id for it in acted]

    length = action.start.dist(action.end)
    if length > 0.0:
        u = UnitVec2.from_components(
            action.end.x - action.start.x, action.end.y - action.start.y
        )
        perp = u.perp()
        # swept cross-section depends on gripper orientation: broadside
        # (theta perpendicular to motion) presents the blade, fingers-forward
        # (theta along motion) only the narrow body width
        tx, ty = math.cos(action.gripper_theta), math.sin(action.gripper_theta)
        t_cross = abs(tx * u.y - ty * u.x)
        t_dot = abs(tx * u.x + ty * u.y)
        half_w = 0.5 * max(
            gripper.blade_width * t_cross, gripper.closed_body[1] * t_dot
        )
        # corridor ejection: minimal translation out of the swept footprint
        on_axis = []
        for iid in ids:
            c = centers[iid]
            cp = _closest_point_on_segment(c, action.start, action.end)
            if c.dist(cp) < TIE_EPS:
                on_axis.append(iid)
        side_of = {iid: 1.0 if k % 2 == 0 else -1.0 for k, iid in enumerate(on_axis)}
        for iid in ids:
            c = centers[iid]
            cp = _closest_point_on_segment(c, action.start, action.end)
            need = half_w + radii[iid]
            d = c - cp
            dist = d.norm()
            if dist >= need - 1e-12:
                continue
            if dist < TIE_EPS:
                direction = Vec2(perp.x * side_of[iid], perp.y * side_of[iid])
            else:
                direction = Vec2(d.x / dist, d.y / dist)
            centers[iid] = region.clamp(
                Vec2(cp.x + direction.x * need, cp.y + direction.y * need), radii[iid]
            )

    fo = action.finger_open
    if fo is not None:
        if length > 0.0:
            line_dir = UnitVec2.from_components(
                action.end.x - action.start.x, action.end.y - action.start.y
            )
            line_anchor = action.start
        else:
            line_dir = fo.axis.perp()
            line_anchor = fo.at
        n = line_dir.perp()
        denom = fo.axis.x * n.x + fo.axis.y * n.y
        target = 0.5 * fo.opening
        captured = [
            iid for iid in ids if centers[iid].dist(fo.at) <= gripper.capture_radius
        ]
        zero_off = [
            iid
            for iid in captured
            if abs((centers[iid].x - line_anchor.x) * n.x + (centers[iid].y - line_anchor.y) * n.y)
            < TIE_EPS
        ]
        zero_side = {iid: 1.0 if k % 2 == 0 else -1.0 for k, iid in enumerate(zero_off)}
        if abs(denom) > 1e-12:
            cap_set = set(captured)
            for iid in captured:
                c = centers[iid]
                offset = (c.x - line_anchor.x) * n.x + (c.y - line_anchor.y) * n.y
                if abs(offset) >= target:
                    continue
                side = zero_side.get(iid, 1.0 if offset > 0.0 else -1.0)
                t = (side * target - offset) / denom
                # the fingers shove an item only until it meets the next one;
                # a crowded neighborhood stalls the spread short of the full
                # opening
                sgn = 1.0 if t >= 0.0 else -1.0
                dx, dy = sgn * fo.axis.x, sgn * fo.axis.y
                slide = abs(t)
                for k in ids:
                    if k == iid or k in cap_set:
                        continue
                    ex, ey = centers[k].x - c.x, centers[k].y - c.y
                    proj = ex * dx + ey * dy
                    if proj <= 0.0:
                        continue
                    rsum = radii[iid] + radii[k]
                    gap2 = rsum * rsum - (ex * ex + ey * ey - proj * proj)
                    if gap2 <= 0.0:
                        continue
                    slide = min(slide, max(proj - math.sqrt(gap2), 0.0))
                centers[iid] = region.clamp(
                    Vec2(c.x + dx * slide, c.y + dy * slide), radii[iid]
                )

    _resolve_overlaps(centers, radii, region, ids)
    for iid in ids:
        it = out.item(iid)
        out.replace_item(iid, pose=Pose2(centers[iid], it.pose.theta))
    return out


def grab_at(world, location_mm, open_width, gripper):
    """Rough grab: capture every in-bin item whose center is within
    open_width/2 of the grasp point; captured items become HELD.
    """
    if not (0.0 < open_width <= gripper.max_open_width):
        raise ValueError("open_width must be in (0, max_open_width]")
    if not world.workspace.bin_region.contains(location_mm):
        raise ValueError("grab location must lie inside the bin region")
    out = world.copy()
    out.step_counter += 1
    reach = 0.5 * open_width
    captured = [
        it.id
        for it in sorted(out.items_at(Location.IN_BIN), key=lambda i: i.id)
        if it.center.dist(location_mm) <= reach
    ]
    for iid in captured:
        out.replace_item(iid, location=Location.HELD)
    return out, captured


def _sample_free_pose(rng, region, radius, others, margin, max_attempts=1000):
    """Rejection-sample a center in `region` clear of `others` by `margin`.

    others is a list of (Vec2, radius) obstacles.
    """
    if others:
        ocx = np.array([c.x for c, _ in others])
        ocy = np.array([c.y for c, _ in others])
        orad = np.array([r for _, r in others])
    for _ in range(max_attempts):
        x = rng.uniform(region.x0 + radius, region.x1 - radius)
        y = rng.uniform(region.y0 + radius, region.y1 - radius)
        if not others:
            return Vec2(x, y)
        gap = np.hypot(ocx - x, ocy - y) - orad - radius
        if float(gap.min()) >= margin:
            return Vec2(x, y)
    return None


def place_on_tray(world, gripper, p_contact=0.5, scatter_clearance=2.0):
    """Drop all HELD items onto the tray at seeded-random poses.

    With probability p_contact (and at least two held items) the items are
    laid down as one near-contact cluster, pairwise center gaps at most
    1.2x the largest diameter where geometrically feasible (the cluster
    radius relaxes by 1.4x after repeated rejection, so oversized groups
    still place rather than fail).
    """
    out = world.copy()
    held = sorted(out.items_at(Location.HELD), key=lambda i: i.id)
    if not held:
        raise NoItemsError("place_on_tray needs at least one held item")
    out.step_counter += 1
    tray = out.workspace.tray_region
    obstacles = [
        (it.center, it.bounding_radius) for it in out.items_at(Location.ON_TRAY)
    ]
    rng = out.rng
    contacting = len(held) >= 2 and rng.random() < p_contact
    if contacting:
        max_d = 2.0 * max(it.bounding_radius for it in held)
        cluster_r = 0.6 * max_d
        max_r = max(it.bounding_radius for it in held)
        for _ in range(200):
            anchor = _sample_free_pose(
                rng, tray, cluster_r + max_r, obstacles, 0.0, max_attempts=50
            )
            if anchor is not None:
                break
        else:
            raise PlacementFailureError("no room on tray for a cluster anchor")
        placed = []
        for it in held:
            pos = None
            attempts = 0
            radius_now = cluster_r
            while attempts < 1000:
                attempts += 1
                rr = radius_now * math.sqrt(rng.random())
                ang = rng.uniform(0.0, 2.0 * math.pi)
                cand = Vec2(anchor.x + rr * math.cos(ang), anchor.y + rr * math.sin(ang))
                if not tray.contains(cand, margin=it.bounding_radius):
                    continue
                ok = all(
                    cand.dist(c) >= r + it.bounding_radius + PENETRATION_TOL
                    for c, r in obstacles + placed
                )
                if ok:
                    pos = cand
                    break
                if attempts % 200 == 0:
                    radius_now *= 1.4
            if pos is None:
                raise PlacementFailureError("tray cluster placement exhausted attempts")
            placed.append((pos, it.bounding_radius))
            theta = float(rng.uniform(0.0, 2.0 * math.pi))
            out.replace_item(it.id, pose=Pose2(pos, theta), location=Location.ON_TRAY)
    else:
        for it in held:
            pos = _sample_free_pose(
                rng, tray, it.bounding_radius, obstacles, scatter_clearance
            )
            if pos is None:
                raise PlacementFailureError("tray placement exhausted attempts")
            obstacles.append((pos, it.bounding_radius))
            theta = float(rng.uniform(0.0, 2.0 * math.pi))
            out.replace_item(it.id, pose=Pose2(pos, theta), location=Location.ON_TRAY)
    return out


PLACE_PITCH = 26.0  # mm grid pitch in the place region; fits any legal disk


def place_item(world, item_id):
    """Move one tray item to the next free grid slot in the place region."""
    out = world.copy()
    it = out.item(item_id)
    if it.location is not Location.ON_TRAY:
        raise ValueError(f"item {item_id} is not on the tray")
    out.step_counter += 1
    region = out.workspace.place_region
    cols = max(int(region.width // PLACE_PITCH), 1)
    rows = max(int(region.height // PLACE_PITCH), 1)
    slot = out.count_at(Location.PLACED)
    if slot >= cols * rows:
        raise PlacementFailureError("place region grid is full")
    pos = Vec2(
        region.x0 + 0.5 * PLACE_PITCH + (slot % cols) * PLACE_PITCH,
        region.y0 + 0.5 * PLACE_PITCH + (slot // cols) * PLACE_PITCH,
    )
    out.replace_item(item_id, pose=Pose2(pos, it.pose.theta), location=Location.PLACED)
    return out


def reflow(world):
    """Sweep all tray items back into the bin at seeded-random free poses."""
    out = world.copy()
    tray_items = sorted(out.items_at(Location.ON_TRAY), key=lambda i: i.id)
    if not tray_items:
        return out
    out.step_counter += 1
    bin_region = out.workspace.bin_region
    obstacles = [
        (it.center, it.bounding_radius) for it in out.items_at(Location.IN_BIN)
    ]
    rng = out.rng
    for it in tray_items:
        pos = _sample_free_pose(rng, bin_region, it.bounding_radius, obstacles, 0.5)
        if pos is None:
            raise PlacementFailureError("reflow placement exhausted attempts")
        obstacles.append((pos, it.bounding_radius))
        theta = float(rng.uniform(0.0, 2.0 * math.pi))
        out.replace_item(it.id, pose=Pose2(pos, theta), location=Location.IN_BIN)
    return out


def _regular_polygon(circumradius, sides):
    verts = tuple(
        Vec2(
            circumradius * math.cos(2.0 * math.pi * k / sides),
            circumradius * math.sin(2.0 * math.pi * k / sides),
        )
        for k in range(sides)
    )
    return ConvexPolygon(vertices=verts)


def generate_scene(
    n_objects,
    seed,
    workspace=None,
    shape_kind="disk",
    radius_range=(1.5, 4.0),
    pile_count=0,
    pile_spread=10.0,
    straggler_frac=0.0,
    category_count=1,
    clearance=0.3,
    pile_contact=False,
):
    """Seeded random bin scene.

    With pile_count > 0, most items gather around random pile centers with
    Gaussian spread pile_spread (a clutter regime); a straggler_frac share
    scatters uniformly. pile_count 0 scatters everything uniformly. With
    pile_contact, each pile member attaches touching an existing member, so
    piles grow into dense heaps whose silhouettes merge in the raster.
    """
    if n_objects < 1:
        raise ValueError("n_objects must be >= 1")
    if shape_kind not in ("disk", "polygon", "mixed"):
        raise ValueError(f"unknown shape kind {shape_kind!r}")
    ws = workspace or default_workspace()
    rng = np.random.default_rng(np.random.SeedSequence([seed, 0x5CE2E]))
    bin_region = ws.bin_region
    lo, hi = radius_range
    piles = []
    if pile_count > 0:
        pad = 3.0 * pile_spread + hi
        for _ in range(pile_count):
            piles.append(
                Vec2(
                    rng.uniform(bin_region.x0 + pad, bin_region.x1 - pad),
                    rng.uniform(bin_region.y0 + pad, bin_region.y1 - pad),
                )
            )
    pile_members = [[] for _ in piles]
    items = []
    obstacles = []
    for idx in range(n_objects):
        radius = float(rng.uniform(lo, hi))
        if shape_kind == "disk":
            make_poly = False
        elif shape_kind == "polygon":
            make_poly = True
        else:
            make_poly = bool(rng.random() < 0.5)
        shape = (
            _regular_polygon(radius, int(rng.integers(3, 7))) if make_poly else Disk(radius)
        )
        category = 1 + int(rng.integers(0, category_count))
        pos = None
        use_pile = piles and rng.random() >= straggler_frac
        pile_idx = None
        for attempt in range(2000):
            if use_pile and attempt < 1500:
                k = int(rng.integers(0, len(piles)))
                members = pile_members[k]
                if pile_contact and members:
                    # anchor near the pile centroid so the heap grows compact
                    # instead of dendritic; retries walk outward
                    mcx = sum(m[0] for m in members) / len(members)
                    mcy = sum(m[1] for m in members) / len(members)
                    anchors = sorted(
                        members, key=lambda m: math.hypot(m[0] - mcx, m[1] - mcy)
                    )
                    ax, ay, ar = anchors[min(attempt // 40, len(anchors) - 1)]
                    ang = float(rng.uniform(0.0, 2.0 * math.pi))
                    d = ar + radius + clearance
                    cand = Vec2(ax + d * math.cos(ang), ay + d * math.sin(ang))
                elif pile_contact:
                    cand = piles[k]
                else:
                    cand = Vec2(
                        float(piles[k].x + rng.normal(0.0, pile_spread)),
                        float(piles[k].y + rng.normal(0.0, pile_spread)),
                    )
                if not bin_region.contains(cand, margin=radius):
                    continue
                pile_idx = k
            else:
                cand = Vec2(
                    float(rng.uniform(bin_region.x0 + radius, bin_region.x1 - radius)),
                    float(rng.uniform(bin_region.y0 + radius, bin_region.y1 - radius)),
                )
                pile_idx = None
            if obstacles:
                ocx, ocy, orad = obstacles_arrays
                gap = np.hypot(ocx - cand.x, ocy - cand.y) - orad - radius
                if float(gap.min()) < clearance - 1e-9:
                    continue
            pos = cand
            break
        if pos is None:
            raise PlacementFailureError(
                f"could not place object {idx + 1} of {n_objects}"
            )
        if pile_idx is not None:
            pile_members[pile_idx].append((pos.x, pos.y, radius))
        theta = float(rng.uniform(0.0, 2.0 * math.pi)) if make_poly else 0.0
        items.append(
            Item(
                id=idx + 1,
                category=category,
                shape=shape,
                pose=Pose2(pos, theta),
                location=Location.IN_BIN,
            )
        )
        obstacles.append((pos.x, pos.y, radius))
        obstacles_arrays = (
            np.array([o[0] for o in obstacles]),
            np.array([o[1] for o in obstacles]),
            np.array([o[2] for o in obstacles]),
        )
    return WorldState(items=items, workspace=ws, rng_seed=seed)


def _rect_to_list(r):
    return [r.x0, r.y0, r.x1, r.y1]


def _rect_from_list(v):
    return Rect(*[float(x) for x in v])


def _shape_to_json(shape):
    if isinstance(shape, Disk):
        return {"kind": "disk", "radius": shape.radius}
    return {"kind": "polygon", "vertices": [[v.x, v.y] for v in shape.vertices]}


def _shape_from_json(doc):
    if doc["kind"] == "disk":
        return Disk(radius=float(doc["radius"]))
    if doc["kind"] == "polygon":
        return ConvexPolygon(
            vertices=tuple(Vec2(float(x), float(y)) for x, y in doc["vertices"])
        )
    raise ValueError(f"unknown shape kind {doc['kind']!r}")


def save_scene(world, path):
    """Write the scene as JSON. The RNG state is not stored: a reloaded
    scene restarts its stream from rng_seed, so save/load is the identity
    on freshly generated (canonical) worlds.
    """
    doc = {
        "seed": world.rng_seed,
        "step_counter": world.step_counter,
        "workspace": {
            "bin": _rect_to_list(world.workspace.bin_region),
            "tray": _rect_to_list(world.workspace.tray_region),
            "place": _rect_to_list(world.workspace.place_region),
        },
        "items": [
            {
                "id": it.id,
                "category": it.category,
                "shape": _shape_to_json(it.shape),
                "pose": [it.pose.position.x, it.pose.position.y, it.pose.theta],
                "location": it.location.value,
            }
            for it in world.items
        ],
    }
    with open(path, "w") as f:
        json.dump(doc, f, indent=1)
        f.write("\n")


def load_scene(path):
    with open(path) as f:
        doc = json.load(f)
    ws = Workspace(
        bin_region=_rect_from_list(doc["workspace"]["bin"]),
        tray_region=_rect_from_list(doc["workspace"]["tray"]),
        place_region=_rect_from_list(doc["workspace"]["place"]),
    )
    items = [
        Item(
            id=int(d["id"]),
            category=int(d["category"]),
            shape=_shape_from_json(d["shape"]),
            pose=Pose2(
                Vec2(float(d["pose"][0]), float(d["pose"][1])), float(d["pose"][2])
            ),
            location=Location(d["location"]),
        )
        for d in doc["items"]
    ]
    return WorldState(
        items=items,
        workspace=ws,
        rng_seed=int(doc["seed"]),
        step_counter=int(doc.get("step_counter", 0)),
    )
