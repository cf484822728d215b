"""Cluster analysis and push planning for tray singulation.

Three planners share one goal, making at least one item graspable:
outsweep splits the closest pair of a small cluster by opening the fingers
between them, break-off plows through a large cluster along its elongation
axis, and the random linear push is the comparison baseline.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    NoAccessiblePointError,
    NoItemsError,
    NothingToSingulateError,
)
from .geometry import UnitVec2, Vec2, closest_pair, principal_axes
from .world import FingerOpen, Gripper, Location, PushAction

SIZE_THRESHOLD = 3  # clusters at or below this size get outsweep
D_LINK_DIAMETER_FACTOR = 3.0  # linkage bound = factor x mean item diameter
D_APPROACH_MM = 30.0  # minimum outsweep approach runway
ACCESS_STEP_MM = 5.0  # radial scan step when hunting accessible points
BASELINE_RADIUS_MM = 50.0  # start-point circle around the baseline target
BASELINE_DIST_RANGE_MM = (20.0, 80.0)
KMEANS_MAX_ITER = 100
KMEANS_TOL = 1e-6
KMEANS_MAX_K = 8

_POLICY_TAG = 0x0A11
_BREAK_TAG = 0x0B3A
_BASE_TAG = 0x0BA5


class PolicyFlag(enum.Enum):
    OUTSWEEP = "outsweep"
    BREAK_OFF = "break_off"


@dataclass(frozen=True)
class Cluster:
    member_ids: tuple
    centroid: Vec2
    size: int

    def __post_init__(self):
        if self.size != len(self.member_ids) or self.size < 1:
            raise ValueError("cluster size must equal its member count")


@dataclass(frozen=True)
class PolicyChoice:
    flag: PolicyFlag
    cluster: Cluster

    def __post_init__(self):
        want = (
            PolicyFlag.OUTSWEEP
            if self.cluster.size <= SIZE_THRESHOLD
            else PolicyFlag.BREAK_OFF
        )
        if self.flag is not want:
            raise ValueError("policy flag inconsistent with cluster size")


def _greedy_init(pts, k):
    """Farthest-point center seeding on lexicographically sorted points.

    Value-based throughout, so the result does not depend on input order.
    """
    mean = pts.mean(axis=0)
    d = ((pts - mean) ** 2).sum(axis=1)
    chosen = [int(np.argmax(d))]
    dmin = ((pts - pts[chosen[0]]) ** 2).sum(axis=1)
    while len(chosen) < k:
        nxt = int(np.argmax(dmin))
        chosen.append(nxt)
        dmin = np.minimum(dmin, ((pts - pts[nxt]) ** 2).sum(axis=1))
    return pts[chosen].copy()


def _sorted_mean(sub):
    order = np.lexsort((sub[:, 1], sub[:, 0]))
    return sub[order].mean(axis=0)


def _kmeans(pts, k):
    """Lloyd iterations with deterministic, order-independent tie handling."""
    n = len(pts)
    centers = _greedy_init(pts, k)
    labels = np.zeros(n, dtype=np.int64)
    for _ in range(KMEANS_MAX_ITER):
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = np.argmin(d2, axis=1)
        for c in range(k):
            if (labels == c).any():
                continue
            own = d2[np.arange(n), labels]
            counts = np.bincount(labels, minlength=k)
            own[counts[labels] <= 1] = -1.0
            steal = int(np.argmax(own))
            labels[steal] = c
        new_centers = np.array(
            [_sorted_mean(pts[labels == c]) for c in range(k)]
        )
        shift = float(np.abs(new_centers - centers).max())
        centers = new_centers
        if shift <= KMEANS_TOL:
            break
    return labels


def _max_intra_dist(pts):
    if len(pts) < 2:
        return 0.0
    d2 = ((pts[:, None, :] - pts[None, :, :]) ** 2).sum(axis=2)
    return math.sqrt(float(d2.max()))


def cluster_items(centers, seed=0, d_link=60.0, ids=None):
    """Partition centers into clusters via k-means, k = 1..min(n, 8).

    The chosen k is the smallest whose maximum intra-cluster pairwise
    distance stays within d_link; if even the largest k violates the bound
    the largest-k partition is returned. Clustering is order-independent:
    points are canonicalized by (x, y) sort before seeding, and the result
    is the same for any permutation of the input. The seed argument is
    accepted for interface stability but never changes the partition.

    Returns clusters ordered by smallest member id.
    """
    del seed
    n = len(centers)
    if n == 0:
        raise NoItemsError("cluster_items needs at least one center")
    if ids is None:
        ids = list(range(n))
    pts_raw = np.array([[c.x, c.y] for c in centers], dtype=np.float64)
    order = np.lexsort((pts_raw[:, 1], pts_raw[:, 0]))
    pts = pts_raw[order]
    labels = np.zeros(n, dtype=np.int64)
    for k in range(1, min(n, KMEANS_MAX_K) + 1):
        labels = _kmeans(pts, k)
        if all(
            _max_intra_dist(pts[labels == c]) <= d_link for c in range(k)
        ):
            break
    clusters = []
    for c in sorted(set(int(l) for l in labels)):
        orig = [int(order[i]) for i in np.flatnonzero(labels == c)]
        member_ids = tuple(sorted(ids[i] for i in orig))
        sub = pts_raw[orig]
        cx, cy = _sorted_mean(sub)
        clusters.append(
            Cluster(member_ids=member_ids, centroid=Vec2(cx, cy), size=len(orig))
        )
    clusters.sort(key=lambda cl: cl.member_ids[0])
    return clusters


def tray_linkage_bound(items):
    """Default clustering bound: 3x the mean item diameter."""
    if not items:
        raise NoItemsError("linkage bound needs at least one item")
    mean_diameter = float(
        np.mean([2.0 * it.bounding_radius for it in items])
    )
    return D_LINK_DIAMETER_FACTOR * mean_diameter


def select_policy(world, seed, d_link=None):
    """Sample a cluster of size >= 2 and pick its singulation policy.

    Outsweep for clusters of at most SIZE_THRESHOLD items, break-off for
    larger ones. Singletons are never sampled; if every cluster is a
    singleton there is nothing to singulate.
    """
    items = sorted(world.items_at(Location.ON_TRAY), key=lambda it: it.id)
    if len(items) < 2:
        raise NothingToSingulateError("need at least 2 tray items")
    if d_link is None:
        d_link = tray_linkage_bound(items)
    clusters = cluster_items(
        [it.center for it in items],
        seed=seed,
        d_link=d_link,
        ids=[it.id for it in items],
    )
    eligible = [c for c in clusters if c.size >= 2]
    if not eligible:
        raise NothingToSingulateError("all clusters are singletons")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), _POLICY_TAG]))
    cluster = eligible[int(rng.integers(len(eligible)))]
    flag = (
        PolicyFlag.OUTSWEEP
        if cluster.size <= SIZE_THRESHOLD
        else PolicyFlag.BREAK_OFF
    )
    return PolicyChoice(flag=flag, cluster=cluster)


def _footprint_radius(gripper):
    return 0.5 * math.hypot(gripper.closed_body[0], gripper.closed_body[1])


def _ray_rect_limit(origin, u, rect, margin):
    """Largest t >= 0 with origin + t*u inside rect shrunk by margin."""
    t = math.inf
    if u.x > 1e-12:
        t = min(t, (rect.x1 - margin - origin.x) / u.x)
    elif u.x < -1e-12:
        t = min(t, (rect.x0 + margin - origin.x) / u.x)
    if u.y > 1e-12:
        t = min(t, (rect.y1 - margin - origin.y) / u.y)
    elif u.y < -1e-12:
        t = min(t, (rect.y0 + margin - origin.y) / u.y)
    return t


def _pose_free(p, items, footprint_r):
    return all(
        p.dist(it.center) >= it.bounding_radius + footprint_r for it in items
    )


def plan_outsweep(cluster, world, gripper=None):
    """Approach the closest pair's midpoint and burst the fingers open.

    The approach comes from the farther accessible side perpendicular to
    the pair axis, with at least D_APPROACH_MM of runway.
    """
    if cluster.size < 2:
        raise ValueError("outsweep needs a cluster of at least 2 items")
    gripper = gripper if gripper is not None else Gripper()
    tray = world.workspace.tray_region
    items = world.items_at(Location.ON_TRAY)
    members = [world.item(i) for i in cluster.member_ids]
    centers = [m.center for m in members]
    i, j, _ = closest_pair([(c.x, c.y) for c in centers])
    c1, c2 = centers[i], centers[j]
    c0 = Vec2(0.5 * (c1.x + c2.x), 0.5 * (c1.y + c2.y))
    pair_axis = UnitVec2.from_components(c2.x - c1.x, c2.y - c1.y)
    perp = pair_axis.perp()
    footprint_r = _footprint_radius(gripper)
    pair_ids = (members[i].id, members[j].id)
    half_len = 0.5 * gripper.closed_body[0]
    depth = gripper.closed_body[1]

    def landing_clear(u):
        # fingertips arrive at c0 with the body trailing back along u; a
        # third item only blocks insertion when it overlaps that footprint
        for it in items:
            if it.id in pair_ids:
                continue
            ex, ey = it.center.x - c0.x, it.center.y - c0.y
            a = ex * pair_axis.x + ey * pair_axis.y
            b = ex * u.x + ey * u.y
            da = max(abs(a) - half_len, 0.0)
            db = max(-b, b - depth, 0.0)
            if math.hypot(da, db) < it.bounding_radius:
                return False
        return True

    candidates = []
    for sign in (1.0, -1.0):
        u = UnitVec2.from_components(sign * perp.x, sign * perp.y)
        if not landing_clear(u):
            continue
        t = _ray_rect_limit(c0, u, tray, footprint_r)
        while t >= D_APPROACH_MM - 1e-9:
            p = Vec2(c0.x + u.x * t, c0.y + u.y * t)
            if _pose_free(p, items, footprint_r):
                candidates.append((t, p, sign))
                break
            t -= ACCESS_STEP_MM
    if not candidates:
        raise NoAccessiblePointError(
            "both perpendicular outsweep approaches are blocked"
        )
    tc = tray.center
    candidates.sort(key=lambda c: (-c[0], c[1].dist(tc), -c[2]))
    _, start, _ = candidates[0]
    approach = UnitVec2.from_components(c0.x - start.x, c0.y - start.y)
    return PushAction(
        start=start,
        end=c0,
        gripper_theta=approach.angle(),
        finger_open=FingerOpen(
            at=c0, axis=pair_axis, opening=gripper.max_open_width
        ),
    )


def plan_breakoff(cluster, world, seed, gripper=None):
    """Plow broadside through the cluster along its elongation axis.

    Endpoints sit at collision-free standoffs near both tray margins; the
    motion starts on the side with more wall clearance, seeded coin flip on
    ties.
    """
    if cluster.size < 2:
        raise ValueError("break-off needs a cluster of at least 2 items")
    gripper = gripper if gripper is not None else Gripper()
    tray = world.workspace.tray_region
    items = world.items_at(Location.ON_TRAY)
    members = [world.item(i) for i in cluster.member_ids]
    pts = np.array([[m.center.x, m.center.y] for m in members])
    axis = principal_axes(pts).major
    ci = cluster.centroid
    footprint_r = _footprint_radius(gripper)
    endpoints = []
    for sign in (1.0, -1.0):
        u = UnitVec2.from_components(sign * axis.x, sign * axis.y)
        reach = max(
            (m.center.x - ci.x) * u.x
            + (m.center.y - ci.y) * u.y
            + m.bounding_radius
            for m in members
        )
        t = _ray_rect_limit(ci, u, tray, footprint_r)
        found = None
        while t > reach + footprint_r:
            p = Vec2(ci.x + u.x * t, ci.y + u.y * t)
            if _pose_free(p, items, footprint_r):
                found = p
                break
            t -= ACCESS_STEP_MM
        if found is None:
            raise NoAccessiblePointError(
                "no collision-free standoff on one side of the break line"
            )
        endpoints.append(found)
    p_i, p_j = endpoints
    def wall_dist(p):
        return min(p.x - tray.x0, tray.x1 - p.x, p.y - tray.y0, tray.y1 - p.y)

    di, dj = wall_dist(p_i), wall_dist(p_j)
    if abs(di - dj) <= 1e-9:
        rng = np.random.default_rng(
            np.random.SeedSequence([int(seed), _BREAK_TAG])
        )
        start_is_i = bool(rng.integers(2))
    else:
        start_is_i = di > dj
    start, end = (p_i, p_j) if start_is_i else (p_j, p_i)
    motion = UnitVec2.from_components(end.x - start.x, end.y - start.y)
    return PushAction(
        start=start,
        end=end,
        gripper_theta=motion.perp().angle(),
        finger_open=None,
    )


def plan_baseline_push(cluster, world, seed, gripper=None):
    """Random linear push through one member: the comparison baseline."""
    if cluster.size < 1:
        raise ValueError("baseline push needs a nonempty cluster")
    gripper = gripper if gripper is not None else Gripper()
    tray = world.workspace.tray_region
    footprint_r = _footprint_radius(gripper)
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), _BASE_TAG]))
    members = [world.item(i) for i in cluster.member_ids]
    target = members[int(rng.integers(len(members)))].center
    start = target
    for _ in range(64):
        phi = rng.uniform(0.0, 2.0 * math.pi)
        raw = Vec2(
            target.x + BASELINE_RADIUS_MM * math.cos(phi),
            target.y + BASELINE_RADIUS_MM * math.sin(phi),
        )
        start = tray.clamp(raw, footprint_r)
        if start.dist(target) > 1e-9:
            break
    distance = rng.uniform(*BASELINE_DIST_RANGE_MM)
    u = UnitVec2.from_components(target.x - start.x, target.y - start.y)
    end = tray.clamp(
        Vec2(start.x + u.x * distance, start.y + u.y * distance)
    )
    return PushAction(
        start=start, end=end, gripper_theta=u.angle(), finger_open=None
    )


def action_to_dict(policy, action):
    """JSON-ready description of a planned push, for replay and debugging."""
    d = {
        "policy": policy,
        "start": [action.start.x, action.start.y],
        "end": [action.end.x, action.end.y],
        "theta": action.gripper_theta,
    }
    if action.finger_open is not None:
        fo = action.finger_open
        d["finger_open"] = {
            "at": [fo.at.x, fo.at.y],
            "axis": [fo.axis.x, fo.axis.y],
            "opening": fo.opening,
        }
    return d


def action_from_dict(d):
    """Inverse of action_to_dict. Returns (policy, PushAction)."""
    fo = None
    if "finger_open" in d:
        raw = d["finger_open"]
        fo = FingerOpen(
            at=Vec2(*raw["at"]),
            axis=UnitVec2.from_components(*raw["axis"]),
            opening=raw["opening"],
        )
    action = PushAction(
        start=Vec2(*d["start"]),
        end=Vec2(*d["end"]),
        gripper_theta=d["theta"],
        finger_open=fo,
    )
    return d["policy"], action
