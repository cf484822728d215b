"""World model tests: rasterization against per-pixel oracles, push/grab
dynamics against hand-computed cases, placement rules, conservation, and
scene JSON round-trips.
"""

import math

import numpy as np
import pytest

from binpick.errors import NoItemsError
from binpick.geometry import Pose2, UnitVec2, Vec2
from binpick.world import (
    ConvexPolygon,
    Disk,
    FingerOpen,
    Gripper,
    Item,
    Location,
    PushAction,
    Rect,
    WorldState,
    Workspace,
    apply_push,
    default_workspace,
    generate_scene,
    grab_at,
    load_scene,
    place_item,
    place_on_tray,
    rasterize,
    reflow,
    save_scene,
)

GRIPPER = Gripper()


def make_world(items, seed=0):
    return WorldState(items=items, workspace=default_workspace(), rng_seed=seed)


def disk_item(iid, x, y, r, location=Location.IN_BIN, category=1):
    return Item(
        id=iid,
        category=category,
        shape=Disk(r),
        pose=Pose2(Vec2(x, y)),
        location=location,
    )


class TestShapes:
    def test_disk_radius_bounds(self):
        with pytest.raises(ValueError):
            Disk(0.5)
        with pytest.raises(ValueError):
            Disk(13.0)
        assert Disk(0.6).bounding_radius == 0.6

    def test_polygon_must_be_ccw_convex(self):
        ccw = (Vec2(2.0, 0.0), Vec2(0.0, 2.0), Vec2(-2.0, -1.0))
        assert ConvexPolygon(ccw).bounding_radius == pytest.approx(math.sqrt(5.0))
        with pytest.raises(ValueError):
            ConvexPolygon(tuple(reversed(ccw)))  # CW
        with pytest.raises(ValueError):
            ConvexPolygon(
                (Vec2(0.0, 0.0), Vec2(4.0, 0.0), Vec2(4.0, 4.0), Vec2(3.0, 1.0))
            )  # reflex vertex

    def test_workspace_rejects_overlapping_regions(self):
        with pytest.raises(ValueError):
            Workspace(
                bin_region=Rect(0, 0, 100, 100),
                tray_region=Rect(50, 50, 150, 150),
                place_region=Rect(200, 0, 300, 100),
            )

    def test_item_id_and_category_positive(self):
        with pytest.raises(ValueError):
            disk_item(0, 10, 10, 2)
        with pytest.raises(ValueError):
            disk_item(1, 10, 10, 2, category=0)


class TestRasterize:
    def test_empty_region_all_zero(self):
        w = make_world([])
        frame = rasterize(w, w.workspace.tray_region, 1.0)
        assert frame.instance_mask.sum() == 0
        assert frame.semantic_mask.sum() == 0
        assert (frame.height, frame.width) == (200, 200)

    def test_disk_pixel_count_and_oracle(self):
        w = make_world([disk_item(1, 150.0, 150.0, 10.0)])
        frame = rasterize(w, w.workspace.bin_region, 1.0)
        count = int((frame.instance_mask == 1).sum())
        assert math.pi * 100 - 40 <= count <= math.pi * 100 + 40
        # independent per-pixel containment oracle in world coordinates
        for r in range(135, 166):
            for c in range(135, 166):
                p = frame.px_to_world(r, c)
                want = (p.x - 150.0) ** 2 + (p.y - 150.0) ** 2 <= 100.0
                assert (frame.instance_mask[r, c] == 1) == want

    def test_two_disjoint_disks_two_ids(self):
        w = make_world([disk_item(1, 100, 100, 5), disk_item(2, 200, 200, 5)])
        frame = rasterize(w, w.workspace.bin_region, 2.0)
        assert frame.instance_ids() == [1, 2]

    def test_semantic_mask_follows_instance(self):
        w = make_world([disk_item(1, 100, 100, 5, category=3)])
        frame = rasterize(w, w.workspace.bin_region, 1.0)
        assert np.array_equal(frame.semantic_mask == 3, frame.instance_mask == 1)

    def test_polygon_rasterization_matches_vertices(self):
        tri = ConvexPolygon((Vec2(8.0, 0.0), Vec2(-4.0, 6.0), Vec2(-4.0, -6.0)))
        item = Item(
            id=1, category=1, shape=tri, pose=Pose2(Vec2(150.0, 150.0), 0.4),
            location=Location.IN_BIN,
        )
        w = make_world([item])
        frame = rasterize(w, w.workspace.bin_region, 1.0)
        verts = item.world_vertices()
        inside = 0
        for r, c in np.argwhere(frame.instance_mask == 1):
            p = frame.px_to_world(int(r), int(c))
            cross_ok = True
            for k in range(3):
                x1, y1 = verts[k]
                x2, y2 = verts[(k + 1) % 3]
                if (x2 - x1) * (p.y - y1) - (y2 - y1) * (p.x - x1) < 0:
                    cross_ok = False
            inside += cross_ok
        assert inside == (frame.instance_mask == 1).sum()

    def test_centroid_within_one_px_of_center(self):
        w = generate_scene(40, seed=11)
        frame = rasterize(w, w.workspace.bin_region, 1.0)
        for it in w.items:
            pixels = np.argwhere(frame.instance_mask == it.id)
            if len(pixels) == 0:
                continue
            cr, cc = pixels.mean(axis=0)
            tr, tc = frame.world_to_px(it.center)
            assert math.hypot(cr - tr, cc - tc) < 1.0

    def test_rejects_foreign_region(self):
        w = make_world([])
        with pytest.raises(ValueError):
            rasterize(w, Rect(0, 0, 50, 50), 1.0)


class TestApplyPush:
    def tray_action(self, x0, y0, x1, y1, theta=0.0, finger_open=None):
        return PushAction(
            start=Vec2(x0, y0), end=Vec2(x1, y1), gripper_theta=theta,
            finger_open=finger_open,
        )

    def test_push_through_empty_space(self):
        w = make_world([disk_item(1, 500.0, 180.0, 3.0, Location.ON_TRAY)])
        out = apply_push(w, self.tray_action(340, 20, 420, 20), GRIPPER)
        assert out.item(1).pose == w.item(1).pose

    def test_single_disk_ejected_from_corridor(self):
        # broadside push (theta perpendicular to motion) presents the blade;
        # disk dead on the path axis, minimal translation is perpendicular
        w = make_world([disk_item(1, 420.0, 100.0, 4.0, Location.ON_TRAY)])
        out = apply_push(
            w, self.tray_action(340, 100, 500, 100, theta=math.pi / 2), GRIPPER
        )
        c = out.item(1).center
        dist_from_axis = abs(c.y - 100.0)
        assert dist_from_axis >= 0.5 * GRIPPER.blade_width + 4.0 - 1e-6
        assert c.x == 420.0  # perpendicular ejection only

    def test_offset_disk_ejected_to_its_side(self):
        w = make_world([disk_item(1, 420.0, 103.0, 4.0, Location.ON_TRAY)])
        out = apply_push(
            w, self.tray_action(340, 100, 500, 100, theta=math.pi / 2), GRIPPER
        )
        assert out.item(1).center.y == pytest.approx(110.0)  # 100 + 6 + 4

    def test_fingers_forward_sweeps_narrow_body(self):
        # same push aligned with the motion only clears the 4 mm body width
        w = make_world([disk_item(1, 420.0, 103.9, 4.0, Location.ON_TRAY)])
        out = apply_push(w, self.tray_action(340, 100, 500, 100, theta=0.0), GRIPPER)
        assert out.item(1).center.y == pytest.approx(106.0)  # 100 + 2 + 4
        w2 = make_world([disk_item(1, 420.0, 106.5, 4.0, Location.ON_TRAY)])
        out2 = apply_push(w2, self.tray_action(340, 100, 500, 100, theta=0.0), GRIPPER)
        assert out2.item(1).center.y == 106.5  # outside the narrow corridor

    def test_disk_behind_start_not_touched(self):
        w = make_world([disk_item(1, 330.0, 100.0, 3.0, Location.ON_TRAY)])
        out = apply_push(w, self.tray_action(360, 100, 500, 100), GRIPPER)
        assert out.item(1).pose == w.item(1).pose

    def test_finger_open_two_touching_disks(self):
        # [hand-computed] r=3 disks at 400/406; corridor ejection sends them
        # to +-9 from the approach line, already = opening 18
        r = 3.0
        w = make_world(
            [
                disk_item(1, 400.0, 100.0, r, Location.ON_TRAY),
                disk_item(2, 406.0, 100.0, r, Location.ON_TRAY),
            ]
        )
        fo = FingerOpen(at=Vec2(403.0, 100.0), axis=UnitVec2(1.0, 0.0), opening=6 * r)
        out = apply_push(
            w, self.tray_action(403, 60, 403, 100, finger_open=fo), GRIPPER
        )
        c1, c2 = out.item(1).center, out.item(2).center
        assert c1.dist(c2) >= 6 * r - 1e-9
        assert c1.x < 403.0 < c2.x

    def test_finger_open_zero_length_push(self):
        r = 3.0
        w = make_world(
            [
                disk_item(1, 400.0, 100.0, r, Location.ON_TRAY),
                disk_item(2, 406.0, 100.0, r, Location.ON_TRAY),
            ]
        )
        fo = FingerOpen(at=Vec2(403.0, 100.0), axis=UnitVec2(1.0, 0.0), opening=18.0)
        out = apply_push(
            w,
            PushAction(start=Vec2(403, 100), end=Vec2(403, 100), gripper_theta=0.0,
                       finger_open=fo),
            GRIPPER,
        )
        assert out.item(1).center.dist(out.item(2).center) >= 18.0 - 1e-9

    def test_wall_clamping(self):
        w = make_world([disk_item(1, 510.0, 100.0, 4.0, Location.ON_TRAY)])
        out = apply_push(w, self.tray_action(340, 100, 512, 100), GRIPPER)
        c = out.item(1).center
        assert w.workspace.tray_region.contains(c, margin=4.0 - 1e-9)

    def test_no_overlap_after_push(self):
        rng = np.random.default_rng(3)
        items = []
        for i in range(8):
            items.append(
                disk_item(
                    i + 1,
                    float(rng.uniform(380, 460)),
                    float(rng.uniform(60, 140)),
                    3.0,
                    Location.ON_TRAY,
                )
            )
        w = make_world(items)
        out = apply_push(w, self.tray_action(340, 100, 500, 100), GRIPPER)
        out.validate()

    def test_determinism(self):
        w = generate_scene(20, seed=5)
        for it in list(w.items):
            w.replace_item(it.id, location=Location.IN_BIN)
        action = PushAction(Vec2(50, 150), Vec2(250, 150), 0.0)
        a = apply_push(w, action, GRIPPER)
        b = apply_push(w, action, GRIPPER)
        for it_a, it_b in zip(a.items, b.items):
            assert it_a == it_b

    def test_collinear_pair_splits_to_opposite_sides(self):
        # both centers exactly on the push axis: the parity tie-break must
        # send them to opposite sides, not leave them stacked
        w = make_world(
            [
                disk_item(1, 410.0, 100.0, 2.5, Location.ON_TRAY),
                disk_item(2, 415.0, 100.0, 2.5, Location.ON_TRAY),
            ]
        )
        out = apply_push(w, self.tray_action(340, 100, 500, 100), GRIPPER)
        y1, y2 = out.item(1).center.y, out.item(2).center.y
        assert (y1 - 100.0) * (y2 - 100.0) < 0.0

    def test_rejects_path_outside_regions(self):
        w = make_world([])
        with pytest.raises(ValueError):
            apply_push(w, PushAction(Vec2(-50, -50), Vec2(-10, -10), 0.0), GRIPPER)


class TestGrabAt:
    def test_far_location_captures_nothing(self):
        w = make_world([disk_item(1, 20.0, 20.0, 3.0)])
        out, captured = grab_at(w, Vec2(280.0, 280.0), 10.0, GRIPPER)
        assert captured == []
        assert out.item(1).location is Location.IN_BIN

    def test_capture_threshold(self):
        w = make_world(
            [
                disk_item(1, 102.0, 100.0, 0.9),
                disk_item(2, 100.0, 104.0, 0.9),
                disk_item(3, 109.0, 100.0, 0.9),
            ]
        )
        out, captured = grab_at(w, Vec2(100.0, 100.0), 10.0, GRIPPER)
        assert captured == [1, 2]
        assert out.item(1).location is Location.HELD
        assert out.item(3).location is Location.IN_BIN

    def test_rejects_bad_width(self):
        w = make_world([])
        with pytest.raises(ValueError):
            grab_at(w, Vec2(100, 100), 0.0, GRIPPER)
        with pytest.raises(ValueError):
            grab_at(w, Vec2(100, 100), GRIPPER.max_open_width + 1, GRIPPER)


class TestPlaceOnTray:
    def grab_n(self, n, seed=0):
        items = [disk_item(i + 1, 100.0 + 2.5 * i, 100.0, 1.2) for i in range(n)]
        w = make_world(items, seed=seed)
        out, captured = grab_at(w, Vec2(105.0, 100.0), 40.0, GRIPPER)
        assert len(captured) == n
        return out

    def test_single_item_lands_on_tray(self):
        w = self.grab_n(1)
        out = place_on_tray(w, GRIPPER, p_contact=0.5)
        it = out.items[0]
        assert it.location is Location.ON_TRAY
        assert out.workspace.tray_region.contains(it.center, margin=it.bounding_radius)

    def test_no_held_items_raises(self):
        w = make_world([disk_item(1, 10, 10, 2)])
        with pytest.raises(NoItemsError):
            place_on_tray(w, GRIPPER)

    def test_contact_cluster_pairwise_gap(self):
        items = [
            disk_item(1, 100.0, 100.0, 4.0),
            disk_item(2, 107.0, 100.0, 1.5),
            disk_item(3, 100.0, 107.0, 1.5),
            disk_item(4, 93.0, 100.0, 1.5),
        ]
        w = make_world(items, seed=9)
        w, captured = grab_at(w, Vec2(100.0, 100.0), 30.0, GRIPPER)
        assert len(captured) == 4
        out = place_on_tray(w, GRIPPER, p_contact=1.0)
        out.validate()
        centers = [it.center for it in out.items_at(Location.ON_TRAY)]
        max_d = 2.0 * max(it.bounding_radius for it in out.items)
        worst = max(a.dist(b) for a in centers for b in centers)
        assert worst <= 1.2 * max_d + 1e-9

    def test_scatter_respects_clearance(self):
        w = self.grab_n(3, seed=123)
        # p_contact 0 forces the scatter branch
        out = place_on_tray(w, GRIPPER, p_contact=0.0, scatter_clearance=2.0)
        tray = out.items_at(Location.ON_TRAY)
        for i in range(len(tray)):
            for j in range(i + 1, len(tray)):
                gap = (
                    tray[i].center.dist(tray[j].center)
                    - tray[i].bounding_radius
                    - tray[j].bounding_radius
                )
                assert gap >= 2.0 - 1e-9

    def test_determinism(self):
        a = place_on_tray(self.grab_n(3, seed=77), GRIPPER)
        b = place_on_tray(self.grab_n(3, seed=77), GRIPPER)
        for it_a, it_b in zip(a.items, b.items):
            assert it_a == it_b


class TestPlaceItemAndReflow:
    def test_place_item_moves_to_place_region(self):
        w = make_world([disk_item(1, 400.0, 100.0, 3.0, Location.ON_TRAY)])
        out = place_item(w, 1)
        it = out.item(1)
        assert it.location is Location.PLACED
        assert out.workspace.place_region.contains(it.center, margin=3.0)

    def test_place_slots_do_not_collide(self):
        items = [
            disk_item(i + 1, 340.0 + 14.0 * i, 100.0, 6.0, Location.ON_TRAY)
            for i in range(5)
        ]
        w = make_world(items)
        for i in range(5):
            w = place_item(w, i + 1)
        w.validate()
        assert w.count_at(Location.PLACED) == 5

    def test_reflow_empties_tray(self):
        items = [
            disk_item(1, 400.0, 100.0, 3.0, Location.ON_TRAY),
            disk_item(2, 420.0, 100.0, 3.0, Location.ON_TRAY),
            disk_item(3, 440.0, 100.0, 3.0, Location.ON_TRAY),
            disk_item(4, 50.0, 50.0, 3.0, Location.IN_BIN),
        ]
        w = make_world(items, seed=4)
        out = reflow(w)
        assert out.count_at(Location.ON_TRAY) == 0
        assert out.count_at(Location.IN_BIN) == 4
        assert len(out.items) == 4
        out.validate()

    def test_reflow_empty_tray_is_noop(self):
        w = make_world([disk_item(1, 50.0, 50.0, 3.0)])
        out = reflow(w)
        assert out.step_counter == w.step_counter
        assert out.item(1).pose == w.item(1).pose

    def test_conservation_through_full_cycle(self):
        w = generate_scene(25, seed=8)
        total = len(w.items)
        w, captured = grab_at(w, w.items[0].center, 30.0, GRIPPER)
        assert len(w.items) == total
        if captured:
            w = place_on_tray(w, GRIPPER)
            assert len(w.items) == total
            w = reflow(w)
            assert len(w.items) == total
            assert w.count_at(Location.IN_BIN) == total


class TestGenerateScene:
    def test_counts_and_determinism(self):
        a = generate_scene(60, seed=42)
        b = generate_scene(60, seed=42)
        assert len(a.items) == 60
        for it_a, it_b in zip(a.items, b.items):
            assert it_a == it_b
        a.validate()

    def test_different_seeds_differ(self):
        a = generate_scene(10, seed=1)
        b = generate_scene(10, seed=2)
        assert any(x.pose != y.pose for x, y in zip(a.items, b.items))

    def test_piles_cluster_items(self):
        w = generate_scene(
            60, seed=3, pile_count=3, pile_spread=8.0, straggler_frac=0.0,
            radius_range=(1.5, 2.5),
        )
        w.validate()
        centers = np.array([[it.center.x, it.center.y] for it in w.items])
        # piled scenes have small nearest-neighbor distances on average
        d = np.sqrt(((centers[:, None] - centers[None, :]) ** 2).sum(-1))
        np.fill_diagonal(d, np.inf)
        assert float(np.median(d.min(axis=1))) < 10.0

    def test_polygon_scene_valid(self):
        w = generate_scene(20, seed=6, shape_kind="mixed")
        w.validate()
        assert any(isinstance(it.shape, ConvexPolygon) for it in w.items)

    def test_scene_too_crowded_fails(self):
        from binpick.errors import PlacementFailureError

        ws = Workspace(
            bin_region=Rect(0, 0, 30, 30),
            tray_region=Rect(40, 0, 80, 40),
            place_region=Rect(90, 0, 130, 40),
        )
        with pytest.raises(PlacementFailureError):
            generate_scene(300, seed=1, workspace=ws, radius_range=(2.0, 3.0))


class TestSceneIO:
    def test_round_trip(self, tmp_path):
        w = generate_scene(25, seed=13, shape_kind="mixed")
        path = tmp_path / "scene.json"
        save_scene(w, path)
        loaded = load_scene(path)
        assert loaded.rng_seed == w.rng_seed
        assert loaded.workspace == w.workspace
        assert loaded.items == w.items

    def test_round_trip_is_stable(self, tmp_path):
        w = generate_scene(10, seed=21)
        p1, p2 = tmp_path / "a.json", tmp_path / "b.json"
        save_scene(w, p1)
        save_scene(load_scene(p1), p2)
        assert p1.read_bytes() == p2.read_bytes()
