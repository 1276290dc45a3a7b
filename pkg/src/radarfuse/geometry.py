"""Rigid-body poses and the transform tree mapping radar frames to world.

Axis convention (documented once, used everywhere): in a radar's local
frame +Y is boresight, +Z is up, +X is right.  Azimuth sweeps the XY
plane, elevation rises out of it.  A pose's rotation is applied as
yaw about Z, then pitch about the carried X axis, then roll about the
carried Y (boresight) axis, so a wall radar tilted down 5 degrees is
simply ``pitch = -5 deg``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .tlv import RadarPoint

WORLD_FRAME = "world"


class UnknownFrame(KeyError):
    pass


class CycleDetected(ValueError):
    pass


def _rot_z(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _rot_x(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def _rot_y(a: float) -> np.ndarray:
    c, s = math.cos(a), math.sin(a)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


@dataclass(frozen=True)
class Pose:
    x: float = 0.0
    y: float = 0.0
    z: float = 0.0
    yaw: float = 0.0
    pitch: float = 0.0
    roll: float = 0.0

    def matrix(self) -> np.ndarray:
        return _rot_z(self.yaw) @ _rot_x(self.pitch) @ _rot_y(self.roll)

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    def apply(self, point) -> np.ndarray:
        return self.matrix() @ np.asarray(point, dtype=float) + self.translation

    def compose(self, other: "Pose") -> "_MatrixPose":
        """self ∘ other: apply ``other`` first, then ``self``."""
        return _MatrixPose(self.matrix() @ other.matrix(),
                           self.apply(other.translation))

    def inverse(self) -> "_MatrixPose":
        r = self.matrix().T
        return _MatrixPose(r, -r @ self.translation)


class _MatrixPose(Pose):
    """Pose held as an explicit rotation matrix (composition results)."""

    def __init__(self, rotation: np.ndarray, translation: np.ndarray):
        object.__setattr__(self, "x", float(translation[0]))
        object.__setattr__(self, "y", float(translation[1]))
        object.__setattr__(self, "z", float(translation[2]))
        object.__setattr__(self, "yaw", float("nan"))
        object.__setattr__(self, "pitch", float("nan"))
        object.__setattr__(self, "roll", float("nan"))
        object.__setattr__(self, "_rot", rotation)

    def matrix(self) -> np.ndarray:
        return self._rot


IDENTITY = Pose()


def spherical_to_cartesian(p: RadarPoint) -> np.ndarray:
    """Local Cartesian coordinates; boresight (+Y) at zero azimuth/elevation."""
    ce = math.cos(p.elevation)
    return np.array([
        p.range_m * ce * math.sin(p.azimuth),
        p.range_m * ce * math.cos(p.azimuth),
        p.range_m * math.sin(p.elevation),
    ])


@dataclass(frozen=True)
class WorldPoint:
    x: float
    y: float
    z: float
    doppler: float
    snr: float
    radar_id: str
    ts_ns: int

    @property
    def position(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])


class TransformTree:
    """Immutable frame hierarchy rooted at ``world``.

    Built once from {frame_id: (parent_frame_id, Pose)}; composite
    frame-to-world poses are resolved eagerly so lookups are dict reads.
    """

    def __init__(self, frames: dict[str, tuple[str, Pose]]):
        self._resolved: dict[str, Pose] = {WORLD_FRAME: IDENTITY}
        for frame_id in frames:
            self._resolve_rec(frame_id, frames, set())

    def _resolve_rec(self, frame_id: str, frames, visiting) -> Pose:
        if frame_id in self._resolved:
            return self._resolved[frame_id]
        if frame_id in visiting:
            raise CycleDetected(f"frame '{frame_id}' participates in a cycle")
        if frame_id not in frames:
            raise UnknownFrame(frame_id)
        visiting.add(frame_id)
        parent, pose = frames[frame_id]
        composite = self._resolve_rec(parent, frames, visiting).compose(pose)
        self._resolved[frame_id] = composite
        return composite

    def resolve(self, frame_id: str) -> Pose:
        try:
            return self._resolved[frame_id]
        except KeyError:
            raise UnknownFrame(frame_id) from None

    def has_frame(self, frame_id: str) -> bool:
        return frame_id in self._resolved

    def to_world(self, p: RadarPoint) -> WorldPoint:
        pos = self.resolve(p.radar_id).apply(spherical_to_cartesian(p))
        return WorldPoint(x=float(pos[0]), y=float(pos[1]), z=float(pos[2]),
                          doppler=p.doppler, snr=p.snr,
                          radar_id=p.radar_id, ts_ns=p.ts_ns)
