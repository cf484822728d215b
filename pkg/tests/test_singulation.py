"""Tests for clustering, policy selection, and the three push planners."""

import itertools
import json
import math

import numpy as np
import pytest
from scipy import stats

from binpick.errors import (
    NoAccessiblePointError,
    NoItemsError,
    NothingToSingulateError,
)
from binpick.geometry import Pose2, Vec2
from binpick.singulation import (
    BASELINE_DIST_RANGE_MM,
    Cluster,
    PolicyChoice,
    PolicyFlag,
    SIZE_THRESHOLD,
    action_from_dict,
    action_to_dict,
    cluster_items,
    plan_baseline_push,
    plan_breakoff,
    plan_outsweep,
    select_policy,
    tray_linkage_bound,
)
from binpick.world import (
    Disk,
    Gripper,
    Item,
    Location,
    Rect,
    Workspace,
    WorldState,
)

TRAY = Rect(0.0, 0.0, 200.0, 200.0)


def tray_world(centers, radius=4.0, tray=TRAY):
    ws = Workspace(
        bin_region=Rect(-320.0, 0.0, -20.0, 300.0),
        tray_region=tray,
        place_region=Rect(220.0, 0.0, 370.0, 150.0),
    )
    items = [
        Item(
            id=i + 1,
            category=1,
            shape=Disk(radius=radius),
            pose=Pose2(Vec2(float(x), float(y)), 0.0),
            location=Location.ON_TRAY,
        )
        for i, (x, y) in enumerate(centers)
    ]
    return WorldState(items=items, workspace=ws, rng_seed=0)


def full_cluster(world):
    items = sorted(world.items_at(Location.ON_TRAY), key=lambda it: it.id)
    xs = [it.center.x for it in items]
    ys = [it.center.y for it in items]
    return Cluster(
        member_ids=tuple(it.id for it in items),
        centroid=Vec2(sum(xs) / len(xs), sum(ys) / len(ys)),
        size=len(items),
    )


def max_pairwise(points):
    return max(
        (math.dist(a, b) for a, b in itertools.combinations(points, 2)),
        default=0.0,
    )


class TestClusterTypes:
    def test_cluster_size_must_match_members(self):
        with pytest.raises(ValueError):
            Cluster(member_ids=(1, 2), centroid=Vec2(0, 0), size=3)

    def test_policy_flag_must_match_size(self):
        small = Cluster(member_ids=(1, 2), centroid=Vec2(0, 0), size=2)
        big = Cluster(member_ids=(1, 2, 3, 4), centroid=Vec2(0, 0), size=4)
        PolicyChoice(flag=PolicyFlag.OUTSWEEP, cluster=small)
        PolicyChoice(flag=PolicyFlag.BREAK_OFF, cluster=big)
        with pytest.raises(ValueError):
            PolicyChoice(flag=PolicyFlag.BREAK_OFF, cluster=small)
        with pytest.raises(ValueError):
            PolicyChoice(flag=PolicyFlag.OUTSWEEP, cluster=big)


class TestClusterItems:
    def test_single_center(self):
        out = cluster_items([Vec2(30.0, 40.0)], d_link=20.0)
        assert len(out) == 1
        assert out[0].size == 1
        assert out[0].centroid.x == 30.0 and out[0].centroid.y == 40.0

    def test_two_well_separated_groups(self):
        group_a = [(0.0, 0.0), (5.0, 0.0), (0.0, 5.0)]
        group_b = [(100.0, 0.0), (105.0, 0.0), (100.0, 5.0)]
        pts = group_a + group_b
        # oracle: one cluster violates the bound, the 3|3 split satisfies it
        assert max_pairwise(pts) > 20.0
        assert max_pairwise(group_a) <= 20.0
        assert max_pairwise(group_b) <= 20.0
        out = cluster_items([Vec2(*p) for p in pts], d_link=20.0)
        assert sorted(c.size for c in out) == [3, 3]
        ids = {frozenset(c.member_ids) for c in out}
        assert ids == {frozenset({0, 1, 2}), frozenset({3, 4, 5})}
        for c in out:
            members = [pts[i] for i in c.member_ids]
            assert max_pairwise(members) <= 20.0

    def test_all_within_bound_single_cluster(self):
        pts = [(50.0 + dx, 60.0 + dy) for dx in (0, 4, 8) for dy in (0, 4)]
        out = cluster_items([Vec2(*p) for p in pts], d_link=60.0)
        assert len(out) == 1
        assert out[0].size == 6

    def test_centroid_is_member_mean(self):
        rng = np.random.default_rng(5)
        pts = rng.uniform(0.0, 200.0, size=(25, 2))
        out = cluster_items([Vec2(*p) for p in pts], d_link=50.0)
        assert sum(c.size for c in out) == 25
        for c in out:
            sub = pts[list(c.member_ids)]
            assert np.allclose(
                [c.centroid.x, c.centroid.y], sub.mean(axis=0), atol=1e-9
            )

    def test_permutation_invariant(self):
        rng = np.random.default_rng(11)
        pts = rng.uniform(0.0, 200.0, size=(30, 2))
        base = cluster_items(
            [Vec2(*p) for p in pts], d_link=60.0, ids=list(range(30))
        )
        base_sets = {frozenset(c.member_ids) for c in base}
        for shuffle_seed in range(5):
            perm = np.random.default_rng(shuffle_seed).permutation(30)
            out = cluster_items(
                [Vec2(*pts[i]) for i in perm],
                d_link=60.0,
                ids=[int(i) for i in perm],
            )
            assert {frozenset(c.member_ids) for c in out} == base_sets

    def test_clusters_ordered_by_smallest_member(self):
        rng = np.random.default_rng(2)
        pts = rng.uniform(0.0, 200.0, size=(20, 2))
        out = cluster_items([Vec2(*p) for p in pts], d_link=40.0)
        firsts = [c.member_ids[0] for c in out]
        assert firsts == sorted(firsts)
        for c in out:
            assert list(c.member_ids) == sorted(c.member_ids)

    def test_k_cap_returns_partition_anyway(self):
        pts = [(50.0 * i, 50.0 * j) for i in range(4) for j in range(3)]
        out = cluster_items([Vec2(*p) for p in pts], d_link=10.0)
        assert len(out) == 8
        assert sum(c.size for c in out) == 12

    def test_empty_raises(self):
        with pytest.raises(NoItemsError):
            cluster_items([], d_link=20.0)


class TestSelectPolicy:
    def test_flag_exhaustive_over_sizes(self):
        for n in range(2, 21):
            centers = [(40.0 + 13.0 * (i % 5), 40.0 + 13.0 * (i // 5)) for i in range(n)]
            world = tray_world(centers, radius=2.0)
            choice = select_policy(world, seed=3, d_link=1e6)
            assert choice.cluster.size == n
            want = PolicyFlag.OUTSWEEP if n <= SIZE_THRESHOLD else PolicyFlag.BREAK_OFF
            assert choice.flag is want
        assert SIZE_THRESHOLD == 3

    def test_boundary_sizes(self):
        for n, flag in ((2, PolicyFlag.OUTSWEEP), (3, PolicyFlag.OUTSWEEP), (4, PolicyFlag.BREAK_OFF)):
            centers = [(90.0 + 12.0 * i, 100.0) for i in range(n)]
            world = tray_world(centers, radius=2.0)
            assert select_policy(world, seed=0, d_link=1e6).flag is flag

    def test_too_few_items(self):
        with pytest.raises(NothingToSingulateError):
            select_policy(tray_world([(100.0, 100.0)]), seed=0)

    def test_all_singletons(self):
        world = tray_world([(20.0, 20.0), (180.0, 180.0)], radius=2.0)
        with pytest.raises(NothingToSingulateError):
            select_policy(world, seed=0, d_link=20.0)

    def test_samples_all_eligible_clusters(self):
        centers = [
            (20.0, 20.0), (28.0, 20.0),
            (180.0, 20.0), (172.0, 20.0),
            (100.0, 180.0), (108.0, 180.0),
        ]
        world = tray_world(centers, radius=2.0)
        seen = {}
        for seed in range(300):
            c = select_policy(world, seed=seed, d_link=30.0).cluster
            seen[c.member_ids] = seen.get(c.member_ids, 0) + 1
        assert len(seen) == 3
        assert all(count > 60 for count in seen.values())

    def test_deterministic_per_seed(self):
        centers = [(90.0, 100.0), (102.0, 100.0), (40.0, 40.0), (52.0, 40.0)]
        world = tray_world(centers, radius=2.0)
        a = select_policy(world, seed=7, d_link=30.0)
        b = select_policy(world, seed=7, d_link=30.0)
        assert a.cluster.member_ids == b.cluster.member_ids
        assert a.flag is b.flag

    def test_default_linkage_bound(self):
        world = tray_world([(90.0, 100.0), (110.0, 100.0)], radius=4.0)
        items = world.items_at(Location.ON_TRAY)
        assert tray_linkage_bound(items) == pytest.approx(24.0)


class TestPlanOutsweep:
    def test_two_disk_midpoint_example(self):
        world = tray_world([(90.0, 100.0), (110.0, 100.0)])
        cluster = full_cluster(world)
        action = plan_outsweep(cluster, world)
        assert action.end.x == 100.0 and action.end.y == 100.0
        fo = action.finger_open
        assert fo is not None
        assert fo.at.x == 100.0 and fo.at.y == 100.0
        assert abs(abs(fo.axis.x) - 1.0) < 1e-12 and abs(fo.axis.y) < 1e-12
        assert fo.opening == Gripper().max_open_width
        # approach comes in along +-y
        assert abs(action.start.x - 100.0) < 1e-9
        assert abs(action.start.y - 100.0) >= 30.0

    def test_finger_axis_perpendicular_to_approach(self):
        rng = np.random.default_rng(8)
        for _ in range(20):
            c = rng.uniform(60.0, 140.0, size=2)
            off = rng.uniform(-1.0, 1.0, size=2)
            off = 14.0 * off / np.linalg.norm(off)
            world = tray_world([tuple(c), tuple(c + off)])
            action = plan_outsweep(full_cluster(world), world)
            ax = action.finger_open.axis
            d = action.end.x - action.start.x, action.end.y - action.start.y
            n = math.hypot(*d)
            assert abs(ax.x * d[0] / n + ax.y * d[1] / n) <= 1e-9

    def test_three_collinear_targets_closest_pair(self):
        centers = [(60.0, 100.0), (100.0, 100.0), (130.0, 100.0)]
        world = tray_world(centers)
        action = plan_outsweep(full_cluster(world), world)
        # oracle: closest pair is (100,100)-(130,100), midpoint (115,100)
        best = min(
            itertools.combinations(centers, 2),
            key=lambda ab: math.dist(ab[0], ab[1]),
        )
        mid = (
            0.5 * (best[0][0] + best[1][0]),
            0.5 * (best[0][1] + best[1][1]),
        )
        assert (action.end.x, action.end.y) == mid

    def test_wall_flush_cluster_approached_from_open_side(self):
        world = tray_world([(100.0, 190.0), (120.0, 190.0)])
        action = plan_outsweep(full_cluster(world), world)
        assert action.start.y < 190.0

    def test_blocked_side_falls_back_to_other(self):
        pair = [(90.0, 100.0), (110.0, 100.0)]
        blockers = [(100.0, float(y)) for y in range(120, 200, 8)]
        world = tray_world(pair + blockers)
        members = tray_world(pair)
        cluster = Cluster(
            member_ids=(1, 2), centroid=Vec2(100.0, 100.0), size=2
        )
        action = plan_outsweep(cluster, world)
        assert action.start.y < 100.0

    def test_no_accessible_point_raises(self):
        tiny = Rect(0.0, 0.0, 60.0, 60.0)
        world = tray_world([(24.0, 30.0), (36.0, 30.0)], tray=tiny)
        with pytest.raises(NoAccessiblePointError):
            plan_outsweep(full_cluster(world), world)

    def test_endpoints_inside_tray(self):
        rng = np.random.default_rng(4)
        for _ in range(20):
            c = rng.uniform(50.0, 150.0, size=2)
            world = tray_world([tuple(c), (float(c[0] + 12.0), float(c[1]))])
            action = plan_outsweep(full_cluster(world), world)
            assert TRAY.contains(action.start)
            assert TRAY.contains(action.end)


class TestPlanBreakoff:
    def test_horizontal_line_pushed_along_x(self):
        centers = [(40.0 + 20.0 * i, 100.0) for i in range(6)]
        world = tray_world(centers)
        action = plan_breakoff(full_cluster(world), world, seed=0)
        d = (action.end.x - action.start.x, action.end.y - action.start.y)
        assert abs(d[1]) <= 1e-9
        assert abs(action.start.y - 100.0) <= 1e-9
        # broadside: gripper angle perpendicular to the motion
        assert min(
            abs(action.gripper_theta - math.pi / 2.0),
            abs(action.gripper_theta - 3.0 * math.pi / 2.0),
        ) <= 1e-9
        assert action.finger_open is None

    def test_two_items_line_through_centers(self):
        world = tray_world([(80.0, 80.0), (120.0, 120.0)])
        action = plan_breakoff(full_cluster(world), world, seed=1)
        d = (action.end.x - action.start.x, action.end.y - action.start.y)
        n = math.hypot(*d)
        cross = d[0] / n * (1.0 / math.sqrt(2.0)) - d[1] / n * (
            1.0 / math.sqrt(2.0)
        )
        assert abs(cross) <= 1e-9

    def test_symmetric_tie_deterministic_per_seed(self):
        centers = [(90.0 + 10.0 * i, 100.0) for i in range(3)]
        world = tray_world(centers)
        cluster = full_cluster(world)
        starts = set()
        for seed in range(20):
            a = plan_breakoff(cluster, world, seed=seed)
            b = plan_breakoff(cluster, world, seed=seed)
            assert (a.start.x, a.start.y) == (b.start.x, b.start.y)
            starts.add(round(a.start.x, 6))
        assert len(starts) == 2

    def test_start_on_side_with_more_wall_room(self):
        # a blocker forces the +x standoff inward; the retracted point has
        # more wall clearance so it becomes the start for every seed
        line = [(60.0 + 12.0 * i, 100.0) for i in range(4)]
        blocker = [(194.0, 100.0)]
        world = tray_world(line + blocker, radius=2.0)
        cluster = Cluster(
            member_ids=(1, 2, 3, 4), centroid=Vec2(78.0, 100.0), size=4
        )
        for seed in range(5):
            action = plan_breakoff(cluster, world, seed=seed)
            assert action.start.x > 150.0
            assert action.end.x < 10.0

    def test_blocked_margin_raises(self):
        line = [(100.0, 30.0 + 30.0 * i) for i in range(5)]
        blockers = [(100.0, float(y)) for y in range(160, 200, 5)]
        blockers += [(100.0, float(y)) for y in range(2, 26, 5)]
        world = tray_world(line + blockers, radius=2.0)
        cluster = Cluster(
            member_ids=tuple(range(1, 6)),
            centroid=Vec2(100.0, 90.0),
            size=5,
        )
        with pytest.raises(NoAccessiblePointError):
            plan_breakoff(cluster, world, seed=0)

    def test_endpoints_inside_tray(self):
        rng = np.random.default_rng(9)
        for trial in range(20):
            base = rng.uniform(60.0, 140.0, size=2)
            centers = [
                tuple(base + rng.uniform(-18.0, 18.0, size=2))
                for _ in range(4)
            ]
            world = tray_world(centers, radius=3.0)
            action = plan_breakoff(full_cluster(world), world, seed=trial)
            assert TRAY.contains(action.start)
            assert TRAY.contains(action.end)


class TestPlanBaseline:
    def test_deterministic(self):
        world = tray_world([(90.0, 100.0), (110.0, 100.0)])
        cluster = full_cluster(world)
        a = plan_baseline_push(cluster, world, seed=5)
        b = plan_baseline_push(cluster, world, seed=5)
        assert (a.start.x, a.start.y, a.end.x, a.end.y) == (
            b.start.x,
            b.start.y,
            b.end.x,
            b.end.y,
        )

    def test_direction_passes_through_target(self):
        world = tray_world([(100.0, 100.0)])
        cluster = full_cluster(world)
        for seed in range(50):
            action = plan_baseline_push(cluster, world, seed=seed)
            dx = action.end.x - action.start.x
            dy = action.end.y - action.start.y
            tx = 100.0 - action.start.x
            ty = 100.0 - action.start.y
            angle = abs(
                math.atan2(dy, dx) - math.atan2(ty, tx)
            )
            angle = min(angle, 2.0 * math.pi - angle)
            assert angle <= 1e-9

    def test_distances_uniform_ks(self):
        centers = [(90.0, 100.0), (110.0, 100.0), (100.0, 115.0)]
        world = tray_world(centers)
        cluster = full_cluster(world)
        dists = []
        for seed in range(1000):
            action = plan_baseline_push(cluster, world, seed=seed)
            dists.append(action.start.dist(action.end))
        lo, hi = BASELINE_DIST_RANGE_MM
        assert min(dists) >= lo and max(dists) <= hi
        stat = stats.kstest(dists, lambda x: (np.asarray(x) - lo) / (hi - lo)).statistic
        assert stat < 0.05

    def test_start_clipped_into_tray(self):
        world = tray_world([(10.0, 10.0)], radius=3.0)
        cluster = full_cluster(world)
        for seed in range(50):
            action = plan_baseline_push(cluster, world, seed=seed)
            assert TRAY.contains(action.start)
            assert TRAY.contains(action.end)

    def test_targets_all_members(self):
        centers = [(40.0, 40.0), (160.0, 40.0), (100.0, 160.0)]
        world = tray_world(centers)
        cluster = full_cluster(world)
        counts = [0, 0, 0]
        for seed in range(300):
            action = plan_baseline_push(cluster, world, seed=seed)
            dx = action.end.x - action.start.x
            dy = action.end.y - action.start.y
            n = math.hypot(dx, dy)
            residuals = [
                abs(
                    (cx - action.start.x) * dy / n
                    - (cy - action.start.y) * dx / n
                )
                for cx, cy in centers
            ]
            counts[int(np.argmin(residuals))] += 1
        assert all(c > 60 for c in counts)


class TestActionJson:
    def test_round_trip_with_finger_open(self):
        world = tray_world([(90.0, 100.0), (110.0, 100.0)])
        action = plan_outsweep(full_cluster(world), world)
        blob = json.dumps(action_to_dict("outsweep", action))
        policy, back = action_from_dict(json.loads(blob))
        assert policy == "outsweep"
        assert (back.start.x, back.start.y) == (action.start.x, action.start.y)
        assert (back.end.x, back.end.y) == (action.end.x, action.end.y)
        assert back.gripper_theta == action.gripper_theta
        assert back.finger_open.opening == action.finger_open.opening
        assert (back.finger_open.at.x, back.finger_open.at.y) == (
            action.finger_open.at.x,
            action.finger_open.at.y,
        )

    def test_round_trip_plain_push(self):
        world = tray_world([(100.0, 100.0), (115.0, 100.0)])
        action = plan_baseline_push(full_cluster(world), world, seed=2)
        blob = json.dumps(action_to_dict("baseline", action))
        policy, back = action_from_dict(json.loads(blob))
        assert policy == "baseline"
        assert back.finger_open is None
        assert back.gripper_theta == action.gripper_theta
