"""Trial orchestration: two-stage picking, the one-stage baseline, and the
benchmark suites.

A two-stage trial loops rough grab -> tray -> fine pick, singulating the
tray whenever no collision-free grasp exists, and reflows leftovers when
done. The one-stage baseline detects directly on the bin image and lives or
dies by that single grasp. Action counts are the motion-cost proxy: 3 per
grasp-and-place, 2 per singulation push, 2 for the final reflow.

Every grasp execution is rechecked against true world geometry, not the
raster the detector saw; perception noise therefore turns into Collision
or MultiCapture failures exactly where a real cell would lose the item.
"""

import csv
import enum
import itertools
import json
import math
import multiprocessing
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .density import (
    CALIBRATED_NOISE,
    DEFAULT_SIGMA_PX,
    EstimatorNoise,
    dot_to_density,
    estimate_density,
    make_dot_map,
    mse,
    select_rough_grasp,
)
from .errors import (
    EmptyBinError,
    NoAccessiblePointError,
    NonConvergenceError,
    NothingToSingulateError,
    PlacementFailureError,
)
from .geometry import Pose2, Vec2, point_segment_distance, convex_polygon_point_distance
from .grasp import detect_grasps, fingertip_centers
from .singulation import (
    Cluster,
    PolicyFlag,
    plan_baseline_push,
    plan_breakoff,
    plan_outsweep,
    select_policy,
)
from .world import (
    Disk,
    Gripper,
    Item,
    Location,
    WorldState,
    apply_push,
    default_workspace,
    generate_scene,
    grab_at,
    place_item,
    place_on_tray,
    rasterize,
    reflow,
)

ACTIONS_ROUGH = 3
ACTIONS_FINE_PICK = 3
ACTIONS_SINGULATION = 2
ACTIONS_REFLOW = 2
# world-recheck slack in mm, sized to the fine tray raster (1 mm/px); a
# coarser sensing stage gets no extra leeway from the executor
EXEC_TOL_MM = 0.75

_SPAWN_TAG = 0x57A4


class Mode(enum.Enum):
    TWO_STAGE = "two_stage"
    ONE_STAGE = "one_stage"


class PolicyMode(enum.Enum):
    AUTO = "auto"
    OUTSWEEP_ONLY = "outsweep"
    BREAKOFF_ONLY = "break_off"
    BASELINE = "baseline"


class FailureReason(enum.Enum):
    NO_GRASP_FOUND = "no_grasp_found"
    MULTI_CAPTURE = "multi_capture"
    COLLISION = "collision"
    LIMIT_EXCEEDED = "limit_exceeded"
    PLACEMENT_FAILURE = "placement_failure"
    NON_CONVERGENCE = "non_convergence"


@dataclass(frozen=True)
class NoiseConfig:
    tray_jitter_sigma: float = 0.2  # px, fine-stage contour jitter
    bin_jitter_sigma: float = 0.3  # px, one-stage contour jitter
    density_sigma_px: float = DEFAULT_SIGMA_PX  # estimator kernel width
    estimator: EstimatorNoise = CALIBRATED_NOISE

    def __post_init__(self):
        if self.tray_jitter_sigma < 0.0 or self.bin_jitter_sigma < 0.0:
            raise ValueError("jitter sigmas must be non-negative")
        if self.density_sigma_px <= 0.0:
            raise ValueError("density sigma must be positive")


@dataclass(frozen=True)
class Limits:
    max_singulations: int = 20
    max_rough_attempts: int = 5

    def __post_init__(self):
        if self.max_singulations < 0 or self.max_rough_attempts < 1:
            raise ValueError("limits must be non-negative / positive")


@dataclass(frozen=True)
class TrialConfig:
    mode: Mode = Mode.TWO_STAGE
    target_picks: int = 1
    singulation_policy: PolicyMode = PolicyMode.AUTO
    noise: NoiseConfig = field(default_factory=NoiseConfig)
    limits: Limits = field(default_factory=Limits)
    seed: int = 0
    gripper: Gripper = field(default_factory=Gripper)
    bin_mm_per_px: float = 2.0
    tray_mm_per_px: float = 1.0
    d_link_mm: object = None  # clustering bound override; None = 3x diameter

    def __post_init__(self):
        if self.target_picks < 1:
            raise ValueError("target_picks must be >= 1")
        if self.bin_mm_per_px <= 0.0 or self.tray_mm_per_px <= 0.0:
            raise ValueError("raster scales must be positive")


@dataclass(frozen=True)
class TrialRecord:
    success: bool
    picked_ids: tuple
    singulation_count: int
    rough_grasp_count: int
    action_count: int
    failure_reason: object = None  # FailureReason or None

    def __post_init__(self):
        if self.success and self.failure_reason is not None:
            raise ValueError("successful trials carry no failure reason")


def derive_seed(root, *parts):
    """Child seed from a root and any mix of ints and short strings."""
    entries = [int(root)]
    for p in parts:
        if isinstance(p, (int, np.integer)):
            entries.append(int(p))
        else:
            entries.append(zlib.crc32(str(p).encode()))
    # the part count keeps (x,) distinct from (x, 0): SeedSequence absorbs
    # trailing zero entropy words
    entries.append(len(parts))
    ss = np.random.SeedSequence(entries)
    return int(ss.generate_state(1, dtype=np.uint64)[0])


def _true_clearance(point, item):
    """Signed distance from a world point to an item's true boundary."""
    if isinstance(item.shape, Disk):
        return point.dist(item.center) - item.shape.radius
    return convex_polygon_point_distance(item.world_vertices(), point.x, point.y)


def execute_fine_pick(world, frame, grasp, gripper, location):
    """World-space recheck of one detected grasp.

    Returns (picked_id, None) on success or (None, FailureReason) when the
    fingertips hit true geometry or the closing line does not enclose
    exactly one item. Enclosure uses bounding disks, matching the push
    dynamics' shape model.
    """
    f1, f2, _ = fingertip_centers(grasp, gripper, frame.mm_per_px)
    w1 = frame.px_to_world(f1[0], f1[1])
    w2 = frame.px_to_world(f2[0], f2[1])
    tol = EXEC_TOL_MM
    candidates = sorted(world.items_at(location), key=lambda it: it.id)
    for it in candidates:
        for p in (w1, w2):
            if _true_clearance(p, it) < gripper.finger_footprint_radius - tol:
                return None, FailureReason.COLLISION
    enclosed = [
        it.id
        for it in candidates
        if point_segment_distance(it.center, w1, w2) <= it.bounding_radius
    ]
    if len(enclosed) == 0:
        return None, FailureReason.COLLISION
    if len(enclosed) > 1:
        return None, FailureReason.MULTI_CAPTURE
    return enclosed[0], None


def _deliver(world, item_id):
    """Move a just-picked item to the place-region grid."""
    if world.item(item_id).location is not Location.ON_TRAY:
        # one-stage picks travel straight from the bin through the gripper
        world = world.copy()
        world.replace_item(item_id, location=Location.ON_TRAY)
    return place_item(world, item_id)


def _sweep_accessible_pair(cluster, world, gripper):
    """Outsweep the closest member pair whose insertion point is reachable.

    Pairs are tried in ascending separation; raises NoAccessiblePointError
    when every pair is crowded or walled in.
    """
    members = [world.item(i) for i in cluster.member_ids]
    pairs = sorted(
        (a.center.dist(b.center), a.id, b.id)
        for a, b in itertools.combinations(members, 2)
    )
    for _, a, b in pairs:
        ca, cb = world.item(a).center, world.item(b).center
        sub = Cluster(
            member_ids=(a, b),
            centroid=Vec2(0.5 * (ca.x + cb.x), 0.5 * (ca.y + cb.y)),
            size=2,
        )
        try:
            return plan_outsweep(sub, world, gripper=gripper)
        except NoAccessiblePointError:
            continue
    raise NoAccessiblePointError("no member pair admits an outsweep")


def _plan_singulation(world, policy_mode, seed, gripper, d_link=None):
    """Pick a cluster and plan one push for it under the given policy.

    Auto falls back outsweep -> break-off -> baseline when no accessible
    point exists; the single-policy arms keep trying their own policy
    before resorting to a baseline push, so a plannable action always
    comes back.
    """
    choice = select_policy(world, seed=seed, d_link=d_link)
    cluster = choice.cluster
    if policy_mode is PolicyMode.BASELINE:
        return plan_baseline_push(cluster, world, seed=seed, gripper=gripper)
    if policy_mode is PolicyMode.OUTSWEEP_ONLY:
        try:
            return _sweep_accessible_pair(cluster, world, gripper)
        except NoAccessiblePointError:
            return plan_baseline_push(cluster, world, seed=seed, gripper=gripper)
    if policy_mode is PolicyMode.AUTO and choice.flag is PolicyFlag.OUTSWEEP:
        try:
            return plan_outsweep(cluster, world, gripper=gripper)
        except NoAccessiblePointError:
            pass
    try:
        return plan_breakoff(cluster, world, seed=seed, gripper=gripper)
    except NoAccessiblePointError:
        return plan_baseline_push(cluster, world, seed=seed, gripper=gripper)


def _fine_pick_once(world, cfg, jitter_sigma, location, mm_per_px):
    """One detect-and-execute attempt in the given region.

    Returns (world, picked_id, reason): picked_id None with reason None
    means no grasp was found at all.
    """
    region = (
        world.workspace.tray_region
        if location is Location.ON_TRAY
        else world.workspace.bin_region
    )
    frame = rasterize(world, region, mm_per_px)
    grasps = detect_grasps(
        frame,
        cfg.gripper,
        contour_jitter_sigma=jitter_sigma,
        seed=derive_seed(cfg.seed, "detect", world.step_counter),
    )
    if not grasps:
        return world, None, None
    picked, reason = execute_fine_pick(world, frame, grasps[0], cfg.gripper, location)
    if picked is None:
        return world, None, reason
    return world, picked, None


def run_two_stage(world, cfg, with_world=False):
    """Run one full two-stage cycle; never raises, failures land in the
    record. with_world=True also returns the final world state."""
    world = world.copy()
    picked = []
    actions = 0
    rough_count = 0
    singulations = 0
    failure = None
    while len(picked) < cfg.target_picks:
        if world.count_at(Location.ON_TRAY) == 0:
            if world.count_at(Location.IN_BIN) == 0:
                failure = FailureReason.NO_GRASP_FOUND
                break
            if rough_count >= cfg.limits.max_rough_attempts:
                failure = FailureReason.LIMIT_EXCEEDED
                break
            rough_count += 1
            actions += ACTIONS_ROUGH
            bin_frame = rasterize(
                world, world.workspace.bin_region, cfg.bin_mm_per_px
            )
            density = estimate_density(
                bin_frame,
                cfg.noise.estimator,
                seed=derive_seed(cfg.seed, "density", world.step_counter),
                sigma=cfg.noise.density_sigma_px,
            )
            try:
                site = select_rough_grasp(
                    density, bin_frame, cfg.gripper.capture_radius
                )
            except EmptyBinError:
                failure = FailureReason.NO_GRASP_FOUND
                break
            world, captured = grab_at(
                world, site, 2.0 * cfg.gripper.capture_radius, cfg.gripper
            )
            if not captured:
                continue
            world = place_on_tray(world, cfg.gripper)
            continue
        world, got, reason = _fine_pick_once(
            world, cfg, cfg.noise.tray_jitter_sigma, Location.ON_TRAY,
            cfg.tray_mm_per_px,
        )
        if got is not None:
            actions += ACTIONS_FINE_PICK
            try:
                world = _deliver(world, got)
            except PlacementFailureError:
                failure = FailureReason.PLACEMENT_FAILURE
                break
            picked.append(got)
        elif reason is not None:
            actions += ACTIONS_FINE_PICK
            failure = reason
            break
        else:
            if singulations >= cfg.limits.max_singulations:
                failure = FailureReason.LIMIT_EXCEEDED
                break
            try:
                action = _plan_singulation(
                    world,
                    cfg.singulation_policy,
                    derive_seed(cfg.seed, "plan", world.step_counter),
                    cfg.gripper,
                    d_link=cfg.d_link_mm,
                )
            except NothingToSingulateError:
                # isolated items the detector still cannot grasp
                failure = FailureReason.NO_GRASP_FOUND
                break
            try:
                world = apply_push(world, action, cfg.gripper)
            except NonConvergenceError:
                failure = FailureReason.NON_CONVERGENCE
                break
            singulations += 1
            actions += ACTIONS_SINGULATION
    # reflow runs on every exit path so the tray never stays populated
    actions += ACTIONS_REFLOW
    try:
        world = reflow(world)
    except PlacementFailureError:
        if failure is None:
            failure = FailureReason.PLACEMENT_FAILURE
    success = failure is None and len(picked) >= cfg.target_picks
    record = TrialRecord(
        success=success,
        picked_ids=tuple(picked),
        singulation_count=singulations,
        rough_grasp_count=rough_count,
        action_count=actions,
        failure_reason=None if success else (failure or FailureReason.NO_GRASP_FOUND),
    )
    return (record, world) if with_world else record


def run_one_stage(world, cfg, with_world=False):
    """Single sensing-execution pass straight on the bin."""
    world = world.copy()
    world, got, reason = _fine_pick_once(
        world, cfg, cfg.noise.bin_jitter_sigma, Location.IN_BIN,
        cfg.bin_mm_per_px,
    )
    failure = None
    picked = ()
    if got is None:
        failure = reason if reason is not None else FailureReason.NO_GRASP_FOUND
    else:
        try:
            world = _deliver(world, got)
            picked = (got,)
        except PlacementFailureError:
            failure = FailureReason.PLACEMENT_FAILURE
    record = TrialRecord(
        success=failure is None,
        picked_ids=picked,
        singulation_count=0,
        rough_grasp_count=0,
        action_count=ACTIONS_FINE_PICK,
        failure_reason=failure,
    )
    return (record, world) if with_world else record


# Standard estimator-calibration scenes: (n_objects, pile_count, seed)
# spanning the supported 100..300 item scale in both scatter and pile
# regimes. MSE_CALIBRATION in the density module was measured here.
CALIBRATION_SCENES = (
    (100, 0, 101),
    (130, 2, 102),
    (160, 3, 103),
    (190, 0, 104),
    (220, 2, 105),
    (250, 3, 106),
    (280, 0, 107),
    (300, 4, 108),
)


def calibration_mses(noise=CALIBRATED_NOISE, sigma=DEFAULT_SIGMA_PX):
    """Per-scene estimator error on the standard calibration scenes."""
    out = []
    for n_objects, pile_count, seed in CALIBRATION_SCENES:
        world = generate_scene(
            n_objects, seed=seed, pile_count=pile_count, pile_spread=10.0
        )
        frame = rasterize(world, world.workspace.bin_region, 2.0)
        truth = dot_to_density(make_dot_map(frame), sigma)
        guess = estimate_density(
            frame, noise, seed=derive_seed(seed, "calibrate"), sigma=sigma
        )
        out.append(mse(guess, truth))
    return out


def spawn_tray_cluster(size, seed, workspace=None, radii_cycle=(2.0, 3.0)):
    """Tray-only world holding one compact near-contact cluster of `size`
    disks.

    Items attach one by one, touching the already-placed member nearest the
    running centroid, so the cluster grows as a heap rather than a chain.
    """
    ws = workspace if workspace is not None else default_workspace()
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), _SPAWN_TAG]))
    tray = ws.tray_region
    center = tray.center
    placed = []  # (Vec2, radius)
    for i in range(size):
        r = radii_cycle[i % len(radii_cycle)]
        if not placed:
            placed.append((center, r))
            continue
        cx = sum(p.x for p, _ in placed) / len(placed)
        cy = sum(p.y for p, _ in placed) / len(placed)
        anchors = sorted(placed, key=lambda pr: pr[0].dist(Vec2(cx, cy)))
        pos = None
        for attempt in range(2000):
            anchor, ar = anchors[min(attempt // 40, len(anchors) - 1)]
            ang = rng.uniform(0.0, 2.0 * math.pi)
            cand = Vec2(
                anchor.x + (ar + r) * math.cos(ang),
                anchor.y + (ar + r) * math.sin(ang),
            )
            if not tray.contains(cand, margin=r + 1.0):
                continue
            if all(
                cand.dist(p) >= (pr + r) - 1e-9 for p, pr in placed
            ):
                pos = cand
                break
        if pos is None:
            raise PlacementFailureError("could not attach cluster member")
        placed.append((pos, r))
    items = [
        Item(
            id=i + 1,
            category=1,
            shape=Disk(radius=r),
            pose=Pose2(p, 0.0),
            location=Location.ON_TRAY,
        )
        for i, (p, r) in enumerate(placed)
    ]
    return WorldState(items=items, workspace=ws, rng_seed=seed)


@dataclass(frozen=True)
class BenchRow:
    mode: str
    policy: str
    cluster_size: int
    seed: int
    record: TrialRecord


def run_singulation_trial(policy, size, seed, max_singulations=200):
    """Empty one tray cluster with the fine-pick loop, counting pushes."""
    cfg = TrialConfig(
        mode=Mode.TWO_STAGE,
        singulation_policy=policy,
        noise=NoiseConfig(
            tray_jitter_sigma=0.0,
            bin_jitter_sigma=0.0,
            estimator=EstimatorNoise(),
        ),
        limits=Limits(max_singulations=max_singulations),
        seed=seed,
    )
    world = spawn_tray_cluster(size, seed)
    picked = 0
    singulations = 0
    actions = 0
    failure = None
    while world.count_at(Location.ON_TRAY) > 0:
        world, got, reason = _fine_pick_once(
            world, cfg, 0.0, Location.ON_TRAY, cfg.tray_mm_per_px
        )
        if got is not None:
            actions += ACTIONS_FINE_PICK
            try:
                world = _deliver(world, got)
            except PlacementFailureError:
                failure = FailureReason.PLACEMENT_FAILURE
                break
            picked += 1
        elif reason is not None:
            actions += ACTIONS_FINE_PICK
            failure = reason
            break
        else:
            if singulations >= max_singulations:
                failure = FailureReason.LIMIT_EXCEEDED
                break
            try:
                action = _plan_singulation(
                    world,
                    policy,
                    derive_seed(seed, "plan", world.step_counter),
                    cfg.gripper,
                )
            except NothingToSingulateError:
                failure = FailureReason.NO_GRASP_FOUND
                break
            try:
                world = apply_push(world, action, cfg.gripper)
            except NonConvergenceError:
                failure = FailureReason.NON_CONVERGENCE
                break
            singulations += 1
            actions += ACTIONS_SINGULATION
    record = TrialRecord(
        success=failure is None,
        picked_ids=tuple(range(1, picked + 1)),
        singulation_count=singulations,
        rough_grasp_count=0,
        action_count=actions,
        failure_reason=failure,
    )
    return BenchRow(
        mode="singulation",
        policy=policy.value,
        cluster_size=size,
        seed=seed,
        record=record,
    )


def _singulation_worker(args):
    policy_value, size, seed, max_singulations = args
    return run_singulation_trial(
        PolicyMode(policy_value), size, seed, max_singulations
    )


POLICY_GRID = (
    PolicyMode.BASELINE,
    PolicyMode.OUTSWEEP_ONLY,
    PolicyMode.BREAKOFF_ONLY,
    PolicyMode.AUTO,
)
SIZE_GRID = (2, 3, 4, 6, 10, 20)


def run_singulation_bench(
    sizes=SIZE_GRID,
    trials=5,
    root_seed=0,
    policies=POLICY_GRID,
    max_singulations=200,
    workers=1,
):
    """Policy x cluster-size x trial grid; rows sorted for stable output.

    The seed depends on (size, trial) only, so every policy faces the same
    spawned cluster and differences come from the pushes alone.
    """
    jobs = []
    for policy in policies:
        for size in sizes:
            for t in range(trials):
                seed = derive_seed(root_seed, "singulation", size, t)
                jobs.append((policy.value, size, seed, max_singulations))
    rows = _run_jobs(_singulation_worker, jobs, workers)
    return sort_rows(rows)


DEFAULT_BENCH_SCENE = {
    "n_objects": 60,
    "shape_kind": "disk",
    "radius_range": (2.0, 4.0),
    "pile_count": 3,
    "pile_spread": 5.0,
    "pile_contact": True,
    "straggler_frac": 0.0,
    "clearance": 0.0,
}


def run_pipeline_trial(mode, seed, scene_params=None, cfg=None):
    """One picking cycle on a fresh seeded bin."""
    params = dict(DEFAULT_BENCH_SCENE)
    if scene_params:
        params.update(scene_params)
    world = generate_scene(seed=derive_seed(seed, "scene"), **params)
    base = cfg if cfg is not None else TrialConfig()
    trial_cfg = replace(base, mode=mode, seed=seed)
    if mode is Mode.TWO_STAGE:
        record = run_two_stage(world, trial_cfg)
    else:
        record = run_one_stage(world, trial_cfg)
    return BenchRow(
        mode=mode.value,
        policy=trial_cfg.singulation_policy.value,
        cluster_size=params["n_objects"],
        seed=seed,
        record=record,
    )


def _pipeline_worker(args):
    mode_value, seed, scene_params, cfg = args
    return run_pipeline_trial(Mode(mode_value), seed, scene_params, cfg)


def run_pipeline_bench(
    trials=200, root_seed=0, scene_params=None, cfg=None, workers=1
):
    """N two-stage plus N one-stage cycles on per-trial seeded scenes."""
    jobs = []
    for mode in (Mode.TWO_STAGE, Mode.ONE_STAGE):
        for t in range(trials):
            seed = derive_seed(root_seed, "pipeline", mode.value, t)
            jobs.append((mode.value, seed, scene_params, cfg))
    rows = _run_jobs(_pipeline_worker, jobs, workers)
    return sort_rows(rows)


def _run_jobs(worker, jobs, workers):
    if workers <= 1:
        return [worker(j) for j in jobs]
    with multiprocessing.Pool(workers) as pool:
        return pool.map(worker, jobs)


def sort_rows(rows):
    return sorted(
        rows, key=lambda r: (r.mode, r.policy, r.cluster_size, r.seed)
    )


CSV_HEADER = (
    "mode,policy,cluster_size,seed,success,singulation_count,"
    "rough_grasp_count,action_count,failure_reason"
)


def rows_to_csv(rows, path):
    rows = sort_rows(rows)
    with open(path, "w") as f:
        f.write(CSV_HEADER + "\n")
        for r in rows:
            rec = r.record
            reason = rec.failure_reason.value if rec.failure_reason else ""
            f.write(
                f"{r.mode},{r.policy},{r.cluster_size},{r.seed},"
                f"{'true' if rec.success else 'false'},{rec.singulation_count},"
                f"{rec.rough_grasp_count},{rec.action_count},{reason}\n"
            )


def rows_from_csv(path):
    out = []
    with open(path) as f:
        for raw in csv.DictReader(f):
            rec = TrialRecord(
                success=raw["success"] == "true",
                picked_ids=(),
                singulation_count=int(raw["singulation_count"]),
                rough_grasp_count=int(raw["rough_grasp_count"]),
                action_count=int(raw["action_count"]),
                failure_reason=(
                    FailureReason(raw["failure_reason"])
                    if raw["failure_reason"]
                    else None
                ),
            )
            out.append(
                BenchRow(
                    mode=raw["mode"],
                    policy=raw["policy"],
                    cluster_size=int(raw["cluster_size"]),
                    seed=int(raw["seed"]),
                    record=rec,
                )
            )
    return out


def summarize(rows):
    """Per-(mode, policy, cluster_size) means, JSON-ready."""
    groups = {}
    for r in rows:
        groups.setdefault((r.mode, r.policy, r.cluster_size), []).append(r.record)
    out = []
    for key in sorted(groups):
        recs = groups[key]
        out.append(
            {
                "mode": key[0],
                "policy": key[1],
                "cluster_size": key[2],
                "trials": len(recs),
                "success_rate": sum(1 for r in recs if r.success) / len(recs),
                "mean_singulations": float(
                    np.mean([r.singulation_count for r in recs])
                ),
                "mean_actions": float(np.mean([r.action_count for r in recs])),
            }
        )
    return {"groups": out}


def write_summary(rows, path):
    with open(path, "w") as f:
        json.dump(summarize(rows), f, indent=2, sort_keys=True)
        f.write("\n")
