"""Synthetic multi-radar scenarios with ground truth.

Walkers follow waypoint polylines (ping-pong at the ends) at constant
speed, frozen during configured dwell windows.  Each radar tick, every
walker visible in that radar's field of view sheds a Poisson number of
noisy points; ghosts pop up uniformly in the room for a single frame.
When doppler-zero suppression is on, a walker whose radial speed toward
a radar is below the suppression threshold sheds nothing to that radar,
mimicking firmware that only reports moving reflectors.

Everything is driven by one seeded generator in a fixed iteration
order, so a scenario renders to byte-identical logs every run.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field

import numpy as np

from . import tlv
from .geometry import Pose
from .recording import LogRecord, Recorder

DOPPLER_SUPPRESSION_THRESHOLD = 0.05  # m/s


class InvalidScenario(ValueError):
    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path


@dataclass(frozen=True)
class WalkerSpec:
    walker_id: int
    entry_time: float                 # s, absolute scenario time
    waypoints: tuple                  # ((x, y), ...)
    speed: float                      # m/s
    dwells: tuple = ()                # ((start_s, end_s), ...) absolute


@dataclass(frozen=True)
class RadarSpec:
    radar_id: str
    pose: Pose
    azimuth_fov: float = math.radians(120)   # full span
    elevation_fov: float = math.radians(30)  # full span
    max_range: float = 14.0
    frame_rate: float = 10.0
    phase: float = 0.0                        # s, tick offset
    units: tlv.DecodeUnits = field(default_factory=tlv.DecodeUnits)


@dataclass(frozen=True)
class NoiseSpec:
    pos_sigma: float = 0.1
    points_per_target: float = 6.0
    ghost_rate: float = 0.5       # ghosts per radar frame
    dropout_prob: float = 0.02    # whole-walker frame dropout per radar


@dataclass(frozen=True)
class Scenario:
    room_x: tuple[float, float] = (0.0, 12.0)
    room_y: tuple[float, float] = (0.0, 6.0)
    room_height: float = 2.35
    body_height: float = 1.0
    radars: tuple = ()
    walkers: tuple = ()
    noise: NoiseSpec = field(default_factory=NoiseSpec)
    doppler_zero_suppression: bool = True
    duration: float = 60.0
    seed: int = 0


def validate_scenario(sc: Scenario):
    if not sc.radars:
        raise InvalidScenario("radars", "at least one radar required")
    if sc.duration <= 0:
        raise InvalidScenario("duration", "must be > 0")
    if sc.noise.pos_sigma < 0:
        raise InvalidScenario("noise.pos_sigma", "must be >= 0")
    for i, w in enumerate(sc.walkers):
        if w.speed < 0:
            raise InvalidScenario(f"walkers[{i}].speed", "must be >= 0")
        if len(w.waypoints) < 1:
            raise InvalidScenario(f"walkers[{i}].waypoints", "need >= 1 point")
        for j, (x, y) in enumerate(w.waypoints):
            if not (sc.room_x[0] <= x <= sc.room_x[1]
                    and sc.room_y[0] <= y <= sc.room_y[1]):
                raise InvalidScenario(f"walkers[{i}].waypoints[{j}]",
                                      "outside room bounds")


def _polyline_pos(waypoints, arc: float) -> np.ndarray:
    """Position at arc length along a ping-pong loop over the polyline."""
    pts = [np.array(p, dtype=float) for p in waypoints]
    if len(pts) == 1:
        return pts[0]
    seg = [float(np.linalg.norm(b - a)) for a, b in zip(pts, pts[1:])]
    total = sum(seg)
    if total == 0:
        return pts[0]
    m = arc % (2 * total)
    if m > total:
        m = 2 * total - m
    for a, b, L in zip(pts, pts[1:], seg):
        if m <= L and L > 0:
            return a + (m / L) * (b - a)
        m -= L
    return pts[-1]


def walker_position(w: WalkerSpec, t: float):
    """World XY at scenario time t, or None before entry."""
    if t < w.entry_time:
        return None
    travel = t - w.entry_time
    for start, end in w.dwells:
        lo = max(start, w.entry_time)
        travel -= max(0.0, min(t, end) - lo) if lo < min(t, end) else 0.0
    return _polyline_pos(w.waypoints, w.speed * travel)


def walker_velocity(w: WalkerSpec, t: float, h: float = 0.02):
    if walker_position(w, t) is None:
        return None
    a = walker_position(w, max(t - h, w.entry_time))
    b = walker_position(w, t + h)
    return (b - a) / (2 * h) if a is not None else np.zeros(2)


@dataclass(frozen=True)
class SimFrame:
    radar_id: str
    ts_ns: int
    points: tuple          # RadarPoints
    labels: tuple          # "walker:<id>" | "ghost", aligned with points


def _spherical(local: np.ndarray):
    rng = float(np.linalg.norm(local))
    if rng == 0:
        return 0.0, 0.0, 0.0
    az = math.atan2(local[0], local[1])
    el = math.asin(max(-1.0, min(1.0, local[2] / rng)))
    return rng, az, el


def _encodable(rng, az, el, dop, snr, units: tlv.DecodeUnits) -> bool:
    return (abs(round(az / units.azimuth_scale)) <= 127
            and abs(round(el / units.elevation_scale)) <= 127
            and abs(round(dop / units.doppler_scale)) <= 32767
            and 0 <= round(rng / units.range_scale) <= 65535
            and 0 <= round(snr / units.snr_scale) <= 65535)


def simulate_frames(sc: Scenario):
    """Yield labeled SimFrames for every radar tick, in timestamp order."""
    validate_scenario(sc)
    rng = np.random.default_rng(sc.seed)
    ticks = []
    for radar in sorted(sc.radars, key=lambda r: r.radar_id):
        n = int(sc.duration * radar.frame_rate)
        for k in range(n):
            t = radar.phase + k / radar.frame_rate
            if t <= sc.duration:
                ticks.append((t, radar.radar_id, radar))
    ticks.sort(key=lambda x: (x[0], x[1]))

    for t, _, radar in ticks:
        ts_ns = int(round(t * 1e9))
        inv = radar.pose.inverse()
        radar_pos = radar.pose.translation
        points, labels = [], []

        for w in sorted(sc.walkers, key=lambda w: w.walker_id):
            xy = walker_position(w, t)
            if xy is None:
                continue
            body = np.array([xy[0], xy[1], sc.body_height])
            local = inv.apply(body)
            if local[1] <= 0:
                continue
            r0, az0, el0 = _spherical(local)
            if (r0 > radar.max_range or abs(az0) > radar.azimuth_fov / 2
                    or abs(el0) > radar.elevation_fov / 2):
                continue
            vel2 = walker_velocity(w, t)
            vel = np.array([vel2[0], vel2[1], 0.0])
            to_radar = body - radar_pos
            radial = float(vel @ to_radar) / max(float(np.linalg.norm(to_radar)), 1e-9)
            if (sc.doppler_zero_suppression
                    and abs(radial) < DOPPLER_SUPPRESSION_THRESHOLD):
                continue
            if rng.random() < sc.noise.dropout_prob:
                continue
            n_pts = rng.poisson(sc.noise.points_per_target)
            for _ in range(n_pts):
                noisy = body + rng.normal(0.0, sc.noise.pos_sigma, 3)
                r, az, el = _spherical(inv.apply(noisy))
                dop = radial + rng.normal(0.0, 0.03)
                snr = max(0.0, 15.0 + 3.0 * rng.standard_normal())
                if not _encodable(r, az, el, dop, snr, radar.units):
                    continue
                points.append(tlv.RadarPoint(
                    range_m=r, azimuth=az, elevation=el, doppler=dop,
                    snr=snr, radar_id=radar.radar_id, ts_ns=ts_ns))
                labels.append(f"walker:{w.walker_id}")

        n_ghosts = rng.poisson(sc.noise.ghost_rate)
        for _ in range(n_ghosts):
            gx = rng.uniform(*sc.room_x)
            gy = rng.uniform(*sc.room_y)
            gz = rng.uniform(0.2, sc.room_height)
            r, az, el = _spherical(inv.apply(np.array([gx, gy, gz])))
            dop = rng.uniform(-3.0, 3.0)
            snr = rng.uniform(8.0, 20.0)
            if r <= 0 or r > radar.max_range:
                continue
            if not _encodable(r, az, el, dop, snr, radar.units):
                continue
            points.append(tlv.RadarPoint(
                range_m=r, azimuth=az, elevation=el, doppler=dop,
                snr=snr, radar_id=radar.radar_id, ts_ns=ts_ns))
            labels.append("ghost")

        yield SimFrame(radar_id=radar.radar_id, ts_ns=ts_ns,
                       points=tuple(points), labels=tuple(labels))


def ground_truth_series(sc: Scenario, tick: float = 0.5):
    """Per-tick occupancy truth: list of dicts with time, count, walkers."""
    out = []
    t = 0.0
    while t <= sc.duration + 1e-9:
        walkers = []
        for w in sc.walkers:
            xy = walker_position(w, t)
            if xy is None:
                continue
            vel = walker_velocity(w, t)
            walkers.append({"id": w.walker_id,
                            "x": round(float(xy[0]), 3),
                            "y": round(float(xy[1]), 3),
                            "speed": round(float(np.linalg.norm(vel)), 3)})
        out.append({"t_s": round(t, 3), "count": len(walkers),
                    "walkers": walkers})
        t += tick
    return out


def simulate(sc: Scenario, log_path, truth_path=None, clock=None):
    """Render a scenario to a raw-TLV recording plus a truth file."""
    units_by_radar = {r.radar_id: r.units for r in sc.radars}
    rec = Recorder(log_path, radar_ids=sorted(units_by_radar),
                   clock=clock or (lambda: 0.0))
    try:
        for frame in simulate_frames(sc):
            blob = tlv.encode_frame(list(frame.points),
                                    units_by_radar[frame.radar_id])
            rec.write(LogRecord(ts_ns=frame.ts_ns, radar_id=frame.radar_id,
                                kind="raw_tlv", payload=blob))
    finally:
        rec.close()
    if truth_path is not None:
        with open(truth_path, "w", encoding="utf-8") as fh:
            for row in ground_truth_series(sc):
                fh.write(json.dumps(row, separators=(",", ":")) + "\n")


def paper_scenario(seed: int = 7) -> Scenario:
    """Bundled reference scenario: a 12 x 6 m lab, two tilted wall radars
    facing each other plus one ceiling radar, four walkers entering 15 s
    apart, sit-still dwell segments and a brief grouping episode."""
    wall_a = RadarSpec(
        radar_id="wall_a",
        pose=Pose(x=0.05, y=3.0, z=2.35, yaw=-math.pi / 2,
                  pitch=math.radians(-5.0)),
        azimuth_fov=math.radians(120), elevation_fov=math.radians(30),
        max_range=14.0, frame_rate=10.0, phase=0.0)
    wall_b = RadarSpec(
        radar_id="wall_b",
        pose=Pose(x=11.95, y=3.0, z=2.35, yaw=math.pi / 2,
                  pitch=math.radians(-5.0)),
        azimuth_fov=math.radians(120), elevation_fov=math.radians(30),
        max_range=14.0, frame_rate=10.0, phase=0.003)
    ceiling = RadarSpec(
        radar_id="ceiling",
        pose=Pose(x=6.0, y=3.0, z=2.35, pitch=-math.pi / 2),
        azimuth_fov=math.radians(120), elevation_fov=math.radians(120),
        max_range=5.0, frame_rate=10.0, phase=0.006)

    walkers = (
        WalkerSpec(walker_id=0, entry_time=0.0, speed=1.1,
                   waypoints=((1.0, 1.0), (10.5, 1.2), (10.5, 4.8),
                              (1.2, 4.6)),
                   dwells=((22.0, 28.0), (62.0, 68.0), (92.0, 98.0))),
        WalkerSpec(walker_id=1, entry_time=15.0, speed=1.0,
                   waypoints=((0.8, 0.8), (6.2, 2.4), (10.8, 1.0),
                              (6.0, 4.5)),
                   dwells=((33.0, 39.0), (70.0, 76.0), (100.0, 106.0))),
        WalkerSpec(walker_id=2, entry_time=30.0, speed=1.2,
                   waypoints=((0.8, 5.2), (5.2, 3.4), (9.5, 5.0),
                              (11.0, 2.2)),
                   dwells=((46.0, 52.0), (78.0, 84.0), (104.0, 110.0))),
        WalkerSpec(walker_id=3, entry_time=45.0, speed=1.0,
                   waypoints=((0.8, 2.0), (4.8, 4.6), (7.2, 2.2),
                              (3.0, 1.0)),
                   dwells=((56.0, 61.0), (86.0, 92.0))),
    )

    return Scenario(radars=(wall_a, wall_b, ceiling), walkers=walkers,
                    noise=NoiseSpec(), doppler_zero_suppression=True,
                    duration=115.0, seed=seed)


class EmptySeries(ValueError):
    pass


@dataclass(frozen=True)
class EvalMetrics:
    mae: float
    convergence_time_s: float | None
    peak_estimate: float
    times: tuple
    truth_smoothed: tuple
    estimate_smoothed: tuple

    def to_dict(self) -> dict:
        return {"mae": self.mae,
                "convergence_time_s": self.convergence_time_s,
                "peak_estimate": self.peak_estimate}


def _step_sample(series, times):
    """Sample a step series [(t, v), ...] (sorted) at the given times."""
    ts = [t for t, _ in series]
    vs = [v for _, v in series]
    out = np.empty(len(times))
    j = -1
    for i, t in enumerate(times):
        while j + 1 < len(ts) and ts[j + 1] <= t + 1e-9:
            j += 1
        out[i] = vs[j] if j >= 0 else 0.0
    return out


def _moving_average(values: np.ndarray, window_samples: int) -> np.ndarray:
    out = np.empty_like(values, dtype=float)
    csum = np.concatenate([[0.0], np.cumsum(values)])
    for i in range(len(values)):
        lo = max(0, i + 1 - window_samples)
        out[i] = (csum[i + 1] - csum[lo]) / (i + 1 - lo)
    return out


def evaluate(estimate_series, truth_series, smoothing_seconds: float = 30.0,
             dt: float = 0.5, hold_seconds: float = 10.0) -> EvalMetrics:
    """Compare an estimated count series with ground truth.

    Both series are [(t_s, count), ...].  A trailing moving average of
    ``smoothing_seconds`` is applied to both; convergence is the first
    instant from which the smoothed estimate stays within +-0.5 of the
    smoothed truth for at least ``hold_seconds``; the MAE is over the
    post-convergence interval (over everything when never converged).
    """
    if not estimate_series or not truth_series:
        raise EmptySeries("both series must be non-empty")
    estimate_series = sorted(estimate_series)
    truth_series = sorted(truth_series)
    t0 = min(estimate_series[0][0], truth_series[0][0])
    t1 = max(estimate_series[-1][0], truth_series[-1][0])
    times = np.arange(t0, t1 + dt / 2, dt)
    est = _step_sample(estimate_series, times)
    tru = _step_sample(truth_series, times)
    w = max(1, int(round(smoothing_seconds / dt)))
    est_s = _moving_average(est, w)
    tru_s = _moving_average(tru, w)

    diff_ok = np.abs(est_s - tru_s) <= 0.5
    hold = max(1, int(round(hold_seconds / dt)))
    conv_idx = None
    run = 0
    for i, ok in enumerate(diff_ok):
        run = run + 1 if ok else 0
        if run >= hold:
            conv_idx = i - hold + 1
            break
    mae_slice = slice(conv_idx, None) if conv_idx is not None else slice(None)
    mae = float(np.mean(np.abs(est_s[mae_slice] - tru_s[mae_slice])))
    return EvalMetrics(
        mae=mae,
        convergence_time_s=float(times[conv_idx]) if conv_idx is not None else None,
        peak_estimate=float(np.max(est)),
        times=tuple(times.tolist()),
        truth_smoothed=tuple(tru_s.tolist()),
        estimate_smoothed=tuple(est_s.tolist()),
    )
