"""Pipeline configuration loading with field-path error reporting.

One YAML file describes the whole deployment: radars (pose, decode
units, per-radar filters), merge/clustering/tracker/grid parameters,
zones and optional MQTT.  Angles in the file are degrees; they are
converted to radians exactly once, here.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import yaml

from .clustering import ClusterAlgorithm, ClusterConfig
from .filtering import BufferConfig, ThresholdConfig
from .fusion import LatePolicy, MergeConfig
from .geometry import Pose
from .occupancy import GridConfig, Zone
from .telemetry import MqttConfig
from .tlv import DecodeUnits
from .tracking import TrackerConfig


class ConfigError(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class RadarConfig:
    radar_id: str
    pose: Pose
    units: DecodeUnits
    threshold: ThresholdConfig
    buffer: BufferConfig


@dataclass(frozen=True)
class PipelineConfig:
    radars: tuple[RadarConfig, ...]
    merge: MergeConfig
    clustering: ClusterConfig
    tracker: TrackerConfig
    grid: GridConfig
    zones: tuple[Zone, ...]
    mqtt: MqttConfig | None = None
    status_log: str | None = None
    event_log: str | None = None


def _expect_map(doc, path) -> dict:
    if not isinstance(doc, dict):
        raise ConfigError(path, f"expected a mapping, got {type(doc).__name__}")
    return doc


def _get(doc: dict, key: str, path: str, default=..., types=None):
    if key not in doc:
        if default is ...:
            raise ConfigError(f"{path}.{key}", "required field missing")
        return default
    v = doc[key]
    if types is not None and not isinstance(v, types):
        raise ConfigError(f"{path}.{key}",
                          f"expected {types}, got {type(v).__name__}")
    return v


def _num(doc, key, path, default=...):
    v = _get(doc, key, path, default)
    if v is default and default is not ...:
        return v
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise ConfigError(f"{path}.{key}", "expected a number")
    return float(v)


def _build(cls, kwargs, path):
    try:
        return cls(**kwargs)
    except (ValueError, TypeError) as e:
        raise ConfigError(path, str(e)) from None


def _load_pose(doc, path) -> Pose:
    d = _expect_map(doc, path)
    return _build(Pose, dict(
        x=_num(d, "x", path, 0.0), y=_num(d, "y", path, 0.0),
        z=_num(d, "z", path, 0.0),
        yaw=math.radians(_num(d, "yaw_deg", path, 0.0)),
        pitch=math.radians(_num(d, "pitch_deg", path, 0.0)),
        roll=math.radians(_num(d, "roll_deg", path, 0.0)),
    ), path)


def _load_radar(doc, path) -> RadarConfig:
    d = _expect_map(doc, path)
    radar_id = _get(d, "radar_id", path, types=str)
    pose = _load_pose(_get(d, "pose", path, {}), f"{path}.pose")
    ud = _expect_map(_get(d, "units", path, {}), f"{path}.units")
    units = _build(DecodeUnits, {k: _num(ud, k, f"{path}.units")
                                 for k in ud}, f"{path}.units")
    td = _expect_map(_get(d, "threshold", path, {}), f"{path}.threshold")
    threshold = _build(ThresholdConfig, {k: _num(td, k, f"{path}.threshold")
                                         for k in td}, f"{path}.threshold")
    bd = _expect_map(_get(d, "buffer", path, {}), f"{path}.buffer")
    bkw = {}
    for k in bd:
        v = _num(bd, k, f"{path}.buffer")
        bkw[k] = int(v) if k in ("window_frames", "min_support") else v
    buffer = _build(BufferConfig, bkw, f"{path}.buffer")
    return RadarConfig(radar_id=radar_id, pose=pose, units=units,
                       threshold=threshold, buffer=buffer)


def _load_zone(doc, path) -> Zone:
    d = _expect_map(doc, path)
    center = _get(d, "center", path, [0.0, 0.0], types=(list, tuple))
    if len(center) != 2:
        raise ConfigError(f"{path}.center", "expected [x, y]")
    return _build(Zone, dict(
        zone_id=_get(d, "zone_id", path, types=str),
        center_x=float(center[0]), center_y=float(center[1]),
        len_x=_num(d, "len_x", path), len_y=_num(d, "len_y", path),
    ), path)


def load_config(path_or_doc) -> PipelineConfig:
    if isinstance(path_or_doc, dict):
        doc = path_or_doc
    else:
        with open(path_or_doc, encoding="utf-8") as fh:
            try:
                doc = yaml.safe_load(fh)
            except yaml.YAMLError as e:
                raise ConfigError("<file>", f"invalid YAML: {e}") from None
    doc = _expect_map(doc, "<root>")

    radars_doc = _get(doc, "radars", "<root>", types=list)
    if not radars_doc:
        raise ConfigError("radars", "at least one radar required")
    radars = tuple(_load_radar(r, f"radars[{i}]")
                   for i, r in enumerate(radars_doc))
    ids = [r.radar_id for r in radars]
    if len(set(ids)) != len(ids):
        raise ConfigError("radars", f"duplicate radar_id in {ids}")

    md = _expect_map(_get(doc, "merge", "<root>", {}), "merge")
    try:
        policy = LatePolicy(_get(md, "late_policy", "merge", "drop"))
    except ValueError:
        raise ConfigError("merge.late_policy",
                          f"unknown policy {md.get('late_policy')!r}") from None
    merge = _build(MergeConfig, dict(
        reorder_horizon_ms=_num(md, "reorder_horizon_ms", "merge", 100.0),
        late_policy=policy), "merge")

    cd = _expect_map(_get(doc, "clustering", "<root>", {}), "clustering")
    try:
        algo = ClusterAlgorithm(_get(cd, "algorithm", "clustering", "dbscan"))
    except ValueError:
        raise ConfigError("clustering.algorithm",
                          f"unknown algorithm {cd.get('algorithm')!r}") from None
    clustering = _build(ClusterConfig, dict(
        window_seconds=_num(cd, "window_seconds", "clustering", 0.5),
        algorithm=algo,
        eps=_num(cd, "eps", "clustering", 0.45),
        min_pts=int(_num(cd, "min_pts", "clustering", 4)),
        optics_max_eps=_num(cd, "optics_max_eps", "clustering", 2.0),
    ), "clustering")

    td = _expect_map(_get(doc, "tracker", "<root>", {}), "tracker")
    tkw = {k: _num(td, k, "tracker") for k in td}
    for k in ("confirm_hits", "max_targets"):
        if k in tkw:
            tkw[k] = int(tkw[k])
    tracker = _build(TrackerConfig, tkw, "tracker")

    gd = _expect_map(_get(doc, "grid", "<root>", {}), "grid")
    gkw = {}
    for k in gd:
        if k in ("bounds_x", "bounds_y"):
            v = _get(gd, k, "grid", types=(list, tuple))
            if len(v) != 2:
                raise ConfigError(f"grid.{k}", "expected [lo, hi]")
            gkw[k] = (float(v[0]), float(v[1]))
        else:
            v = _num(gd, k, "grid")
            gkw[k] = int(v) if k in ("on_threshold", "off_threshold") else v
    grid = _build(GridConfig, gkw, "grid")

    zones_doc = _get(doc, "zones", "<root>", [], types=list)
    if zones_doc:
        zones = tuple(_load_zone(z, f"zones[{i}]")
                      for i, z in enumerate(zones_doc))
        zids = [z.zone_id for z in zones]
        if len(set(zids)) != len(zids):
            raise ConfigError("zones", f"duplicate zone_id in {zids}")
    else:
        # no zones configured: the whole grid plane is one default zone
        cx = (grid.bounds_x[0] + grid.bounds_x[1]) / 2
        cy = (grid.bounds_y[0] + grid.bounds_y[1]) / 2
        zones = (Zone(zone_id="room", center_x=cx, center_y=cy,
                      len_x=grid.bounds_x[1] - grid.bounds_x[0],
                      len_y=grid.bounds_y[1] - grid.bounds_y[0]),)

    mqtt = None
    if "mqtt" in doc and doc["mqtt"] is not None:
        mq = _expect_map(doc["mqtt"], "mqtt")
        mkw = dict(mq)
        mqtt = _build(MqttConfig, mkw, "mqtt")

    return PipelineConfig(
        radars=radars, merge=merge, clustering=clustering, tracker=tracker,
        grid=grid, zones=zones, mqtt=mqtt,
        status_log=_get(doc, "status_log", "<root>", None),
        event_log=_get(doc, "event_log", "<root>", None),
    )


def paper_config_doc(algorithm: str = "dbscan") -> dict:
    """Config dict matching :func:`radarfuse.simulation.paper_scenario`."""
    def radar(radar_id, x, yaw_deg, pitch_deg):
        return {"radar_id": radar_id,
                "pose": {"x": x, "y": 3.0, "z": 2.35, "yaw_deg": yaw_deg,
                         "pitch_deg": pitch_deg},
                "threshold": {"snr_min": 8.0, "doppler_abs_max": 5.0},
                "buffer": {"window_frames": 3, "support_radius": 0.4,
                           "min_support": 2}}
    return {
        "radars": [radar("wall_a", 0.05, -90.0, -5.0),
                   radar("wall_b", 11.95, 90.0, -5.0),
                   radar("ceiling", 6.0, 0.0, -90.0)],
        "merge": {"reorder_horizon_ms": 100.0, "late_policy": "drop"},
        "clustering": {"window_seconds": 0.5, "algorithm": algorithm,
                       "eps": 0.45, "min_pts": 4, "optics_max_eps": 2.0},
        "tracker": {"gate_distance": 1.0, "miss_timeout": 10.0,
                    "confirm_hits": 3, "max_targets": 20,
                    "process_noise_accel": 2.0, "measurement_noise": 0.15},
        # on_threshold 1: per-cell on-hysteresis would blank out targets
        # that cross cells faster than the threshold; enter latency is
        # already provided by track confirmation
        "grid": {"cell_size": 0.5, "on_threshold": 1, "off_threshold": 5,
                 "status_period": 2.0, "bounds_x": [0.0, 12.0],
                 "bounds_y": [0.0, 6.0]},
        "zones": [{"zone_id": "room", "center": [6.0, 3.0],
                   "len_x": 12.0, "len_y": 6.0}],
    }
