"""Wires the stages into a processing graph.

Stage order mirrors the node architecture: per-radar decode ->
world-frame transform -> threshold filter -> buffer filter -> merge ->
windowed clustering -> tracking -> occupancy -> telemetry/logs.

Two drivers share the same stage objects:

* :class:`Pipeline` is a synchronous push-based driver.  Replay through
  it is fully deterministic (timestamps drive all logic), which is what
  makes offline A/B comparisons and the regression tests meaningful.
* :func:`run_threaded` runs source, processing and telemetry as
  separate workers joined by bounded queues, giving live deployments
  backpressure instead of unbounded buffering.
"""

from __future__ import annotations

import json
import queue
import threading
from dataclasses import dataclass

from . import tlv
from .clustering import WindowClusterer
from .config import PipelineConfig, RadarConfig
from .filtering import BufferFilter, threshold_filter
from .fusion import Merger
from .geometry import TransformTree, WORLD_FRAME
from .occupancy import OccupancyGrid
from .recording import LogRecord
from .telemetry import Publisher
from .tracking import Tracker


class StageInitError(RuntimeError):
    pass


@dataclass
class _RadarLane:
    cfg: RadarConfig
    decoder: tlv.FrameDecoder
    buffer: BufferFilter
    origin: tuple


class Pipeline:
    """Synchronous pipeline over immutable per-stage messages."""

    def __init__(self, cfg: PipelineConfig, status_sink=None, event_sink=None,
                 publisher: Publisher | None = None):
        self.cfg = cfg
        try:
            self.tree = TransformTree(
                {r.radar_id: (WORLD_FRAME, r.pose) for r in cfg.radars})
        except Exception as e:
            raise StageInitError(f"transform tree: {e}") from e
        self.lanes: dict[str, _RadarLane] = {}
        for r in cfg.radars:
            self.lanes[r.radar_id] = _RadarLane(
                cfg=r,
                decoder=tlv.FrameDecoder(units=r.units, radar_id=r.radar_id),
                buffer=BufferFilter(r.buffer),
                origin=(r.pose.x, r.pose.y, r.pose.z),
            )
        self.merger = Merger(cfg.merge, source_ids=list(self.lanes))
        self.clusterer = WindowClusterer(cfg.clustering)
        self.tracker = Tracker(cfg.tracker)
        self.grid = OccupancyGrid(cfg=cfg.grid, zones=list(cfg.zones))
        self.status_sink = status_sink or (lambda s: None)
        self.event_sink = event_sink or (lambda e: None)
        self.publisher = publisher

    # -- per-stage feeds -------------------------------------------------

    def feed_record(self, record: LogRecord):
        """Entry point for one replayed/recorded log record."""
        lane = self.lanes.get(record.radar_id)
        if lane is None:
            return
        if record.kind == "raw_tlv":
            for points in lane.decoder.feed(record.payload, record.ts_ns):
                self._feed_points(lane, record.ts_ns, points)
        elif record.kind == "points":
            points = [tlv.RadarPoint(range_m=p["range_m"], azimuth=p["azimuth"],
                                     elevation=p["elevation"],
                                     doppler=p["doppler"], snr=p["snr"],
                                     radar_id=record.radar_id,
                                     ts_ns=record.ts_ns)
                      for p in record.payload]
            self._feed_points(lane, record.ts_ns, points)

    def _feed_points(self, lane: _RadarLane, ts_ns: int, points):
        world = [self.tree.to_world(p) for p in points]
        kept = threshold_filter(world, lane.cfg.threshold, lane.origin)
        emitted = lane.buffer.push(ts_ns, kept)
        if emitted is not None:
            self._feed_merger(lane.cfg.radar_id, *emitted)

    def _feed_merger(self, radar_id: str, ts_ns: int, points):
        for ts, _, frame_points in self.merger.push(radar_id, ts_ns, points):
            self._feed_clusterer(ts, frame_points)

    def _feed_clusterer(self, ts_ns: int, points):
        for result in self.clusterer.push(ts_ns, points):
            self._feed_tracker(result)

    def _feed_tracker(self, result):
        positions = [c.position for c in result.centroids]
        snapshot, track_events = self.tracker.step(positions, result.ts_ns)
        events, statuses = self.grid.step(snapshot, result.ts_ns)
        for ev in events:
            self.event_sink(ev)
            if self.publisher is not None:
                self.publisher.offer_event(ev)
        for st in statuses:
            self.status_sink(st)
            if self.publisher is not None:
                self.publisher.offer_status(st)
        if self.publisher is not None:
            self.publisher.pump()

    def flush(self):
        """Drain every stage at end of input."""
        for radar_id, lane in self.lanes.items():
            for ts, points in lane.buffer.flush():
                self._feed_merger(radar_id, ts, points)
        for ts, _, points in self.merger.flush():
            self._feed_clusterer(ts, points)
        for result in self.clusterer.flush():
            self._feed_tracker(result)
        if self.publisher is not None:
            self.publisher.pump()


class JsonlSink:
    """Writes one JSON line per status/event, in a stable key order."""

    def __init__(self, path):
        self._fh = open(path, "w", encoding="utf-8")

    def status(self, st):
        self._fh.write(json.dumps(
            {"t_s": st.ts_ns / 1e9, "zone_id": st.zone_id, "count": st.count,
             "occupants": [[tid, round(d, 3)] for tid, d in st.occupants]},
            separators=(",", ":")) + "\n")

    def event(self, ev):
        self._fh.write(json.dumps(
            {"t_s": ev.ts_ns / 1e9, "kind": ev.kind, "track_id": ev.track_id,
             "zone_id": ev.zone_id}, separators=(",", ":")) + "\n")

    def close(self):
        self._fh.flush()
        self._fh.close()


def replay_through(cfg: PipelineConfig, records, status_sink=None,
                   event_sink=None, publisher=None) -> Pipeline:
    """Push an iterable of LogRecords through a fresh pipeline."""
    pipe = Pipeline(cfg, status_sink=status_sink, event_sink=event_sink,
                    publisher=publisher)
    for record in records:
        pipe.feed_record(record)
    pipe.flush()
    return pipe


_STOP = object()


def run_threaded(cfg: PipelineConfig, records, status_sink=None,
                 event_sink=None, publisher: Publisher | None = None,
                 queue_size: int = 64, stop_event: threading.Event | None = None):
    """Pipeline-parallel driver: bounded queues between source,
    processing and telemetry workers; a full queue blocks the producer
    (backpressure) instead of buffering without bound."""
    in_q: queue.Queue = queue.Queue(maxsize=queue_size)
    out_q: queue.Queue = queue.Queue(maxsize=queue_size)
    stop = stop_event or threading.Event()
    errors: list[BaseException] = []

    pipe = Pipeline(cfg,
                    status_sink=lambda s: out_q.put(("status", s)),
                    event_sink=lambda e: out_q.put(("event", e)))

    def source():
        try:
            for record in records:
                if stop.is_set():
                    break
                in_q.put(record)
        except BaseException as e:
            errors.append(e)
        finally:
            in_q.put(_STOP)

    def process():
        try:
            while True:
                item = in_q.get()
                if item is _STOP:
                    break
                pipe.feed_record(item)
            pipe.flush()
        except BaseException as e:
            errors.append(e)
        finally:
            out_q.put(_STOP)

    def telemetry():
        try:
            while True:
                try:
                    item = out_q.get(timeout=0.2)
                except queue.Empty:
                    if publisher is not None:
                        publisher.pump()
                    continue
                if item is _STOP:
                    break
                kind, payload = item
                if kind == "status":
                    if status_sink:
                        status_sink(payload)
                    if publisher is not None:
                        publisher.offer_status(payload)
                else:
                    if event_sink:
                        event_sink(payload)
                    if publisher is not None:
                        publisher.offer_event(payload)
                if publisher is not None:
                    publisher.pump()
        except BaseException as e:
            errors.append(e)

    threads = [threading.Thread(target=f, name=f.__name__, daemon=True)
               for f in (source, process, telemetry)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    if publisher is not None:
        publisher.pump()
        publisher.close()
    if errors:
        raise errors[0]
    return pipe
