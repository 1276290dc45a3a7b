"""Record and replay timestamped radar streams as JSON-lines logs.

First line is a header carrying the format version and the radar
registry; every following line is one record.  Timestamps inside the
records drive all downstream logic, so replays are bit-reproducible at
any speed.
"""

from __future__ import annotations

import base64
import json
import time
from dataclasses import dataclass

FORMAT_NAME = "radarfuse-log"
FORMAT_VERSION = 1
FLUSH_INTERVAL = 1.0  # s


class FormatError(ValueError):
    def __init__(self, line_no: int, message: str):
        super().__init__(f"line {line_no}: {message}")
        self.line_no = line_no


class VersionMismatch(FormatError):
    pass


@dataclass(frozen=True)
class LogRecord:
    ts_ns: int
    radar_id: str
    kind: str              # "raw_tlv" | "points"
    payload: object        # bytes for raw_tlv, list of dicts for points


class Recorder:
    def __init__(self, path, radar_ids, clock=time.monotonic):
        self.path = path
        self._fh = open(path, "w", encoding="utf-8")
        self._clock = clock
        self._last_flush = clock()
        self._last_ts: dict[str, int] = {}
        header = {"format": FORMAT_NAME, "version": FORMAT_VERSION,
                  "radars": sorted(radar_ids)}
        self._fh.write(json.dumps(header, separators=(",", ":")) + "\n")

    def write(self, record: LogRecord):
        prev = self._last_ts.get(record.radar_id)
        if prev is not None and record.ts_ns < prev:
            raise ValueError(f"record for {record.radar_id} at {record.ts_ns} "
                             f"regresses behind {prev}")
        self._last_ts[record.radar_id] = record.ts_ns
        if record.kind == "raw_tlv":
            payload = base64.b64encode(record.payload).decode("ascii")
        else:
            payload = record.payload
        doc = {"ts_ns": record.ts_ns, "radar_id": record.radar_id,
               "kind": record.kind, "payload": payload}
        self._fh.write(json.dumps(doc, separators=(",", ":")) + "\n")
        now = self._clock()
        if now - self._last_flush >= FLUSH_INTERVAL:
            self._fh.flush()
            self._last_flush = now

    def close(self):
        self._fh.flush()
        self._fh.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_header(path) -> dict:
    with open(path, encoding="utf-8") as fh:
        first = fh.readline()
    try:
        header = json.loads(first)
    except json.JSONDecodeError as e:
        raise FormatError(1, f"bad header: {e}") from None
    if header.get("format") != FORMAT_NAME:
        raise FormatError(1, "not a radarfuse log")
    if header.get("version") != FORMAT_VERSION:
        raise VersionMismatch(1, f"log version {header.get('version')}, "
                              f"reader supports {FORMAT_VERSION}")
    return header


def replay(path, speed: float = 1.0, as_fast_as_possible: bool = False,
           sleep=time.sleep):
    """Yield LogRecords, pacing by the original timestamp deltas / speed.

    With ``as_fast_as_possible`` no wall delay is inserted at all; the
    records (and their embedded timestamps) are identical either way.
    """
    if speed <= 0:
        raise ValueError("speed must be > 0")
    read_header(path)
    prev_ts = None
    with open(path, encoding="utf-8") as fh:
        fh.readline()  # header, already validated
        for line_no, line in enumerate(fh, start=2):
            if not line.strip():
                continue
            try:
                doc = json.loads(line)
                ts_ns = int(doc["ts_ns"])
                radar_id = doc["radar_id"]
                kind = doc["kind"]
                payload = doc["payload"]
            except (json.JSONDecodeError, KeyError, TypeError, ValueError) as e:
                raise FormatError(line_no, str(e)) from None
            if kind == "raw_tlv":
                payload = base64.b64decode(payload)
            if not as_fast_as_possible and prev_ts is not None:
                delta = (ts_ns - prev_ts) / 1e9 / speed
                if delta > 0:
                    sleep(delta)
            prev_ts = ts_ns
            yield LogRecord(ts_ns=ts_ns, radar_id=radar_id, kind=kind,
                            payload=payload)
