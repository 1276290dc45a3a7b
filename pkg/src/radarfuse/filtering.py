"""Per-radar rejection of implausible and spurious detections.

Two stages, run per radar stream before fusion:

* threshold filter: drop points with low SNR, implausible doppler, or
  (optionally) excessive distance from the radar.
* buffer filter: hold each frame for F subsequent frames and keep only
  points that gather enough spatial support in those later frames.
  Ghosts flash once and vanish; real bodies keep shedding nearby points.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass

import numpy as np

from .geometry import WorldPoint


class OutOfOrderFrame(ValueError):
    pass


@dataclass(frozen=True)
class ThresholdConfig:
    snr_min: float = 8.0            # dB
    doppler_abs_max: float = 5.0    # m/s
    range_max: float | None = None  # m, from the radar origin

    def __post_init__(self):
        if self.snr_min < 0:
            raise ValueError("snr_min must be >= 0")
        if self.doppler_abs_max <= 0:
            raise ValueError("doppler_abs_max must be > 0")


@dataclass(frozen=True)
class BufferConfig:
    window_frames: int = 3     # F
    support_radius: float = 0.4  # m
    min_support: int = 2       # k

    def __post_init__(self):
        if self.window_frames < 1:
            raise ValueError("window_frames must be >= 1")
        if self.support_radius <= 0:
            raise ValueError("support_radius must be > 0")
        if self.min_support < 1:
            raise ValueError("min_support must be >= 1")


def threshold_filter(points: list[WorldPoint], cfg: ThresholdConfig,
                     radar_origin=None) -> list[WorldPoint]:
    """Keep points passing all thresholds; order preserved, no mutation.

    ``radar_origin`` (world xyz of the source radar) is only needed when
    ``range_max`` is set.
    """
    out = []
    for p in points:
        if p.snr < cfg.snr_min:
            continue
        if abs(p.doppler) > cfg.doppler_abs_max:
            continue
        if cfg.range_max is not None and radar_origin is not None:
            d = math.dist((p.x, p.y, p.z), tuple(radar_origin))
            if d > cfg.range_max:
                continue
        out.append(p)
    return out


class _GridIndex:
    """Uniform grid hash for fixed-radius neighbor counting."""

    def __init__(self, cell: float):
        self.cell = cell
        self.cells: dict[tuple[int, int, int], list[np.ndarray]] = {}

    def add(self, pos: np.ndarray):
        key = tuple(int(math.floor(c / self.cell)) for c in pos)
        self.cells.setdefault(key, []).append(pos)

    def count_within(self, pos: np.ndarray, radius: float, limit: int) -> int:
        """Neighbors within ``radius``, stopping early at ``limit``."""
        cx, cy, cz = (int(math.floor(c / self.cell)) for c in pos)
        reach = int(math.ceil(radius / self.cell))
        n = 0
        r2 = radius * radius
        for dx in range(-reach, reach + 1):
            for dy in range(-reach, reach + 1):
                for dz in range(-reach, reach + 1):
                    for q in self.cells.get((cx + dx, cy + dy, cz + dz), ()):
                        d = pos - q
                        if float(d @ d) <= r2:
                            n += 1
                            if n >= limit:
                                return n
        return n


class BufferFilter:
    """Forward-support ghost filter with a fixed latency of F frames.

    ``push`` accepts the frame for time t and, once frames t+1..t+F have
    all arrived, emits the filtered frame for t - F (a (ts, points)
    pair) or None while the pipeline is still filling.
    """

    def __init__(self, cfg: BufferConfig):
        self.cfg = cfg
        self._pending: deque[tuple[int, list[WorldPoint]]] = deque()
        self._indexes: deque[_GridIndex] = deque()
        self._last_ts: int | None = None

    def _index_frame(self, points: list[WorldPoint]) -> _GridIndex:
        idx = _GridIndex(self.cfg.support_radius)
        for p in points:
            idx.add(p.position)
        return idx

    def _evaluate(self, frame, indexes) -> tuple[int, list[WorldPoint]]:
        ts, points = frame
        r, k = self.cfg.support_radius, self.cfg.min_support
        kept = []
        for p in points:
            support = 0
            pos = p.position
            for idx in indexes:
                support += idx.count_within(pos, r, k - support)
                if support >= k:
                    kept.append(p)
                    break
        return ts, kept

    def push(self, ts_ns: int, points: list[WorldPoint]):
        if self._last_ts is not None and ts_ns < self._last_ts:
            raise OutOfOrderFrame(f"frame {ts_ns} after {self._last_ts}")
        self._last_ts = ts_ns
        self._pending.append((ts_ns, list(points)))
        self._indexes.append(self._index_frame(points))
        if len(self._pending) <= self.cfg.window_frames:
            return None
        frame = self._pending.popleft()
        self._indexes.popleft()
        return self._evaluate(frame, self._indexes)

    def flush(self):
        """Emit the trailing frames, judged on whatever support remains."""
        out = []
        while self._pending:
            frame = self._pending.popleft()
            self._indexes.popleft()
            out.append(self._evaluate(frame, self._indexes))
        return out
