"""Run configuration: one JSON document holding every tunable.

The document is a nest of typed sections with defaults equal to the module
defaults, strict about unknown keys, and validated on load by constructing
the underlying domain objects. A round trip (dump, load, dump) is
byte-stable, which the CLI relies on for reproducible runs.
"""

import dataclasses
import json
from dataclasses import dataclass, field

from .density import CALIBRATED_NOISE, DEFAULT_SIGMA_PX, EstimatorNoise
from .errors import ConfigError
from .pipeline import Limits, Mode, NoiseConfig, PolicyMode, TrialConfig
from .world import Gripper, Rect, Workspace


@dataclass(frozen=True)
class WorkspaceSection:
    bin_region: tuple = (0.0, 0.0, 300.0, 300.0)
    tray_region: tuple = (320.0, 0.0, 520.0, 200.0)
    place_region: tuple = (320.0, 220.0, 470.0, 370.0)

    def build(self):
        return Workspace(
            bin_region=Rect(*self.bin_region),
            tray_region=Rect(*self.tray_region),
            place_region=Rect(*self.place_region),
        )


@dataclass(frozen=True)
class RasterSection:
    tray_mm_per_px: float = 1.0
    bin_mm_per_px: float = 2.0


@dataclass(frozen=True)
class GripperSection:
    finger_footprint_radius: float = 2.0
    max_open_width: float = 40.0
    closed_body: tuple = (10.0, 4.0)
    capture_radius: float = 6.0
    blade_width: float = 12.0

    def build(self):
        return Gripper(
            finger_footprint_radius=self.finger_footprint_radius,
            max_open_width=self.max_open_width,
            closed_body=tuple(self.closed_body),
            capture_radius=self.capture_radius,
            blade_width=self.blade_width,
        )


@dataclass(frozen=True)
class DensitySection:
    sigma_px: float = DEFAULT_SIGMA_PX
    dot_jitter_sigma: float = CALIBRATED_NOISE.dot_jitter_sigma
    pixel_noise_sigma: float = CALIBRATED_NOISE.pixel_noise_sigma
    dropout_prob: float = CALIBRATED_NOISE.dropout_prob

    def build_noise(self):
        return EstimatorNoise(
            dot_jitter_sigma=self.dot_jitter_sigma,
            pixel_noise_sigma=self.pixel_noise_sigma,
            dropout_prob=self.dropout_prob,
        )


@dataclass(frozen=True)
class DetectionSection:
    tray_jitter_sigma: float = 0.2
    bin_jitter_sigma: float = 0.3


@dataclass(frozen=True)
class TrialSection:
    mode: str = "two_stage"
    singulation_policy: str = "auto"
    target_picks: int = 1
    max_singulations: int = 20
    max_rough_attempts: int = 5
    d_link_mm: object = None


@dataclass(frozen=True)
class BenchSection:
    """Scene recipe for the pipeline suite's fresh bins."""

    n_objects: int = 60
    shape_kind: str = "disk"
    radius_range: tuple = (2.0, 4.0)
    pile_count: int = 3
    pile_spread: float = 5.0
    pile_contact: bool = True
    straggler_frac: float = 0.0
    clearance: float = 0.0
    max_singulations: int = 200

    def scene_params(self):
        return {
            "n_objects": self.n_objects,
            "shape_kind": self.shape_kind,
            "radius_range": tuple(self.radius_range),
            "pile_count": self.pile_count,
            "pile_spread": self.pile_spread,
            "pile_contact": self.pile_contact,
            "straggler_frac": self.straggler_frac,
            "clearance": self.clearance,
        }


@dataclass(frozen=True)
class Config:
    workspace: WorkspaceSection = field(default_factory=WorkspaceSection)
    raster: RasterSection = field(default_factory=RasterSection)
    gripper: GripperSection = field(default_factory=GripperSection)
    density: DensitySection = field(default_factory=DensitySection)
    detection: DetectionSection = field(default_factory=DetectionSection)
    trial: TrialSection = field(default_factory=TrialSection)
    bench: BenchSection = field(default_factory=BenchSection)

    def build_workspace(self):
        return self.workspace.build()

    def build_gripper(self):
        return self.gripper.build()

    def build_trial_config(self, seed=0, mode=None):
        """Assemble a validated TrialConfig; mode overrides the config."""
        mode_value = mode if mode is not None else self.trial.mode
        try:
            return TrialConfig(
                mode=Mode(mode_value),
                target_picks=self.trial.target_picks,
                singulation_policy=PolicyMode(self.trial.singulation_policy),
                noise=NoiseConfig(
                    tray_jitter_sigma=self.detection.tray_jitter_sigma,
                    bin_jitter_sigma=self.detection.bin_jitter_sigma,
                    density_sigma_px=self.density.sigma_px,
                    estimator=self.density.build_noise(),
                ),
                limits=Limits(
                    max_singulations=self.trial.max_singulations,
                    max_rough_attempts=self.trial.max_rough_attempts,
                ),
                seed=seed,
                gripper=self.build_gripper(),
                bin_mm_per_px=self.raster.bin_mm_per_px,
                tray_mm_per_px=self.raster.tray_mm_per_px,
                d_link_mm=self.trial.d_link_mm,
            )
        except ValueError as exc:
            raise ConfigError(str(exc)) from exc

    def validate(self):
        """Construct every derived object so all invariants run."""
        try:
            self.build_workspace()
            self.build_trial_config()
        except (ValueError, ConfigError) as exc:
            raise ConfigError(str(exc)) from exc
        return self


def _from_mapping(cls, data, path):
    if not isinstance(data, dict):
        raise ConfigError(f"{path or 'config'} must be a JSON object")
    fields = {f.name: f for f in dataclasses.fields(cls)}
    unknown = sorted(set(data) - set(fields))
    if unknown:
        raise ConfigError(f"unknown key {unknown[0]!r} in {path or 'config'}")
    kwargs = {}
    for name, value in data.items():
        sub = fields[name].type
        here = f"{path}.{name}" if path else name
        if dataclasses.is_dataclass(sub) and isinstance(sub, type):
            kwargs[name] = _from_mapping(sub, value, here)
        elif isinstance(value, list):
            kwargs[name] = tuple(value)
        else:
            kwargs[name] = value
    try:
        return cls(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{path or 'config'}: {exc}") from exc


def _to_plain(obj):
    if dataclasses.is_dataclass(obj) and not isinstance(obj, type):
        return {
            f.name: _to_plain(getattr(obj, f.name))
            for f in dataclasses.fields(obj)
        }
    if isinstance(obj, tuple):
        return [_to_plain(v) for v in obj]
    return obj


def config_from_dict(data):
    """Strictly parse a nested mapping; unknown keys raise ConfigError."""
    return _from_mapping(Config, data, "").validate()


def config_to_dict(cfg):
    return _to_plain(cfg)


def load_config(path):
    try:
        with open(path) as f:
            data = json.load(f)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from exc
    return config_from_dict(data)


def dump_config(cfg, path):
    with open(path, "w") as f:
        json.dump(config_to_dict(cfg), f, indent=2, sort_keys=True)
        f.write("\n")
