"""Zone occupancy over a hysteresis grid.

The floor plan is discretized into square cells.  Each cell is a small
two-counter automaton: a run of H_on consecutive presence ticks turns
it occupied, a run of H_off consecutive absence ticks turns it back
off, and any contradicting tick resets the run.  A track is considered
inside a zone only while its current cell is occupied and that cell's
center falls inside the zone rectangle, so the hysteresis latency
governs zone membership directly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .tracking import TargetTrack, TrackStatus


@dataclass(frozen=True)
class Zone:
    zone_id: str
    center_x: float
    center_y: float
    len_x: float
    len_y: float

    def __post_init__(self):
        if self.len_x <= 0 or self.len_y <= 0:
            raise ValueError("zone side lengths must be > 0")

    def contains(self, x: float, y: float) -> bool:
        return (abs(x - self.center_x) <= self.len_x / 2.0
                and abs(y - self.center_y) <= self.len_y / 2.0)


@dataclass(frozen=True)
class GridConfig:
    cell_size: float = 0.5
    on_threshold: int = 3     # H_on, consecutive presence ticks
    off_threshold: int = 5    # H_off, consecutive absence ticks
    status_period: float = 2.0  # s
    bounds_x: tuple[float, float] = (0.0, 12.0)
    bounds_y: tuple[float, float] = (0.0, 6.0)

    def __post_init__(self):
        if self.cell_size <= 0:
            raise ValueError("cell_size must be > 0")
        if self.on_threshold < 1 or self.off_threshold < 1:
            raise ValueError("hysteresis thresholds must be >= 1")


@dataclass
class CellState:
    occupied: bool = False
    presence_run: int = 0
    absence_run: int = 0


def cell_tick(cell: CellState, present: bool, h_on: int, h_off: int) -> CellState:
    """One tick of the two-counter hysteresis automaton (pure)."""
    c = CellState(cell.occupied, cell.presence_run, cell.absence_run)
    if present:
        c.absence_run = 0
        if not c.occupied:
            c.presence_run += 1
            if c.presence_run >= h_on:
                c.occupied = True
                c.presence_run = 0
    else:
        c.presence_run = 0
        if c.occupied:
            c.absence_run += 1
            if c.absence_run >= h_off:
                c.occupied = False
                c.absence_run = 0
    return c


@dataclass(frozen=True)
class OccupancyEvent:
    kind: str             # "enter" | "exit"
    track_id: int
    zone_id: str
    ts_ns: int


@dataclass(frozen=True)
class ZoneStatus:
    zone_id: str
    occupants: list[tuple[int, float]]  # (track_id, dwell_seconds)
    count: int
    ts_ns: int


@dataclass
class OccupancyGrid:
    """Sequential consumer of track snapshots, producer of zone events
    and periodic statuses."""

    cfg: GridConfig
    zones: list[Zone]
    cells: dict[tuple[int, int], CellState] = field(default_factory=dict)
    out_of_bounds_count: int = 0
    _membership: dict[tuple[int, str], int] = field(default_factory=dict)  # -> enter ts
    _last_status_ns: int | None = None

    def _cell_key(self, x: float, y: float):
        (x0, x1), (y0, y1) = self.cfg.bounds_x, self.cfg.bounds_y
        if not (x0 <= x <= x1 and y0 <= y <= y1):
            return None
        return (int(math.floor((x - x0) / self.cfg.cell_size)),
                int(math.floor((y - y0) / self.cfg.cell_size)))

    def _cell_center(self, key):
        return (self.cfg.bounds_x[0] + (key[0] + 0.5) * self.cfg.cell_size,
                self.cfg.bounds_y[0] + (key[1] + 0.5) * self.cfg.cell_size)

    def step(self, tracks: list[TargetTrack], ts_ns: int):
        """Returns (events, statuses); statuses is empty between periods."""
        track_cell: dict[int, tuple[int, int]] = {}
        present_cells: set[tuple[int, int]] = set()
        for t in tracks:
            if t.status is not TrackStatus.CONFIRMED:
                continue
            key = self._cell_key(float(t.state[0]), float(t.state[1]))
            if key is None:
                self.out_of_bounds_count += 1
                continue
            track_cell[t.track_id] = key
            present_cells.add(key)

        h_on, h_off = self.cfg.on_threshold, self.cfg.off_threshold
        for key in present_cells:
            cell = self.cells.get(key, CellState())
            self.cells[key] = cell_tick(cell, True, h_on, h_off)
        for key in list(self.cells):
            if key not in present_cells:
                nxt = cell_tick(self.cells[key], False, h_on, h_off)
                if nxt.occupied or nxt.presence_run or nxt.absence_run:
                    self.cells[key] = nxt
                else:
                    del self.cells[key]

        current: set[tuple[int, str]] = set()
        for tid, key in track_cell.items():
            cell = self.cells.get(key)
            if cell is None or not cell.occupied:
                continue
            cx, cy = self._cell_center(key)
            for zone in self.zones:
                if zone.contains(cx, cy):
                    current.add((tid, zone.zone_id))

        events = []
        for pair in sorted(current - set(self._membership)):
            self._membership[pair] = ts_ns
            events.append(OccupancyEvent("enter", pair[0], pair[1], ts_ns))
        for pair in sorted(set(self._membership) - current):
            del self._membership[pair]
            events.append(OccupancyEvent("exit", pair[0], pair[1], ts_ns))

        statuses = []
        period_ns = int(self.cfg.status_period * 1e9)
        if self._last_status_ns is None or ts_ns - self._last_status_ns >= period_ns:
            self._last_status_ns = ts_ns
            statuses = self._statuses(ts_ns)
        return events, statuses

    def _statuses(self, ts_ns: int) -> list[ZoneStatus]:
        out = []
        for zone in self.zones:
            occupants = sorted(
                (tid, (ts_ns - enter_ns) / 1e9)
                for (tid, zid), enter_ns in self._membership.items()
                if zid == zone.zone_id)
            out.append(ZoneStatus(zone_id=zone.zone_id, occupants=occupants,
                                  count=len(occupants), ts_ns=ts_ns))
        return out
