"""MQTT publishing of zone statuses and occupancy events.

Payloads are canonical JSON with a fixed key order so they are
byte-stable for golden-file comparison.  The publisher owns a bounded
in-memory queue and an exponential-backoff reconnect loop, and never
blocks the pipeline: when the broker is down the queue fills and the
oldest entries are dropped and counted.

A minimal MQTT 3.1.1 client over a plain socket is included; any object
with connect/publish/disconnect can be substituted (tests use a fake).
"""

from __future__ import annotations

import json
import socket
import struct
import time
from dataclasses import dataclass, field

from .occupancy import OccupancyEvent, ZoneStatus

MQTT_WILDCARDS = ("/", "+", "#")
BACKOFF_CAP = 30.0  # s


class InvalidZoneId(ValueError):
    pass


@dataclass(frozen=True)
class MqttConfig:
    host: str = "localhost"
    port: int = 1883
    client_id: str = "radarfuse"
    topic_prefix: str = "radarfuse"
    qos_status: int = 0
    qos_event: int = 1
    retain_status: bool = True
    publish_period: float = 2.0
    queue_limit: int = 1000

    def __post_init__(self):
        if not self.topic_prefix or self.topic_prefix.endswith("/"):
            raise ValueError("topic_prefix must be nonempty with no trailing slash")


def serialize_status(status: ZoneStatus) -> bytes:
    targets = [{"id": tid, "dwell_s": round(dwell, 1)}
               for tid, dwell in sorted(status.occupants)]
    doc = {"zone_id": status.zone_id,
           "ts_ms": status.ts_ns // 1_000_000,
           "count": status.count,
           "targets": targets}
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


def serialize_event(event: OccupancyEvent) -> bytes:
    doc = {"zone_id": event.zone_id,
           "ts_ms": event.ts_ns // 1_000_000,
           "kind": event.kind,
           "track_id": event.track_id}
    return json.dumps(doc, separators=(",", ":")).encode("utf-8")


def _check_zone_id(zone_id: str) -> str:
    if any(c in zone_id for c in MQTT_WILDCARDS):
        raise InvalidZoneId(f"zone id {zone_id!r} contains an MQTT wildcard "
                            "or separator")
    return zone_id


def status_topic(prefix: str, zone_id: str) -> str:
    return f"{prefix}/occupancy/{_check_zone_id(zone_id)}/state"


def event_topic(prefix: str, zone_id: str) -> str:
    return f"{prefix}/occupancy/{_check_zone_id(zone_id)}/events"


class MiniMqttClient:
    """Just enough MQTT 3.1.1: CONNECT, PUBLISH (QoS 0/1), DISCONNECT."""

    def __init__(self, host: str, port: int, client_id: str, timeout=5.0):
        self.host = host
        self.port = port
        self.client_id = client_id
        self.timeout = timeout
        self._sock: socket.socket | None = None
        self._packet_id = 0

    @staticmethod
    def _encode_length(n: int) -> bytes:
        out = bytearray()
        while True:
            byte = n % 128
            n //= 128
            out.append(byte | 0x80 if n else byte)
            if not n:
                return bytes(out)

    @staticmethod
    def _utf8(s: str) -> bytes:
        b = s.encode("utf-8")
        return struct.pack(">H", len(b)) + b

    def connect(self):
        sock = socket.create_connection((self.host, self.port), self.timeout)
        sock.settimeout(self.timeout)
        payload = self._utf8(self.client_id)
        var = self._utf8("MQTT") + bytes([4, 0x02]) + struct.pack(">H", 60)
        pkt = bytes([0x10]) + self._encode_length(len(var) + len(payload)) + var + payload
        sock.sendall(pkt)
        ack = sock.recv(4)
        if len(ack) < 4 or ack[0] != 0x20 or ack[3] != 0:
            sock.close()
            raise ConnectionError(f"CONNACK refused: {ack.hex()}")
        self._sock = sock

    def publish(self, topic: str, payload: bytes, qos: int = 0,
                retain: bool = False):
        if self._sock is None:
            raise ConnectionError("not connected")
        flags = (qos << 1) | (1 if retain else 0)
        var = self._utf8(topic)
        if qos > 0:
            self._packet_id = self._packet_id % 65535 + 1
            var += struct.pack(">H", self._packet_id)
        pkt = bytes([0x30 | flags]) + self._encode_length(len(var) + len(payload)) + var + payload
        self._sock.sendall(pkt)
        if qos > 0:
            ack = self._sock.recv(4)
            if len(ack) < 4 or ack[0] != 0x40:
                raise ConnectionError("PUBACK missing")

    def disconnect(self):
        if self._sock is not None:
            try:
                self._sock.sendall(bytes([0xE0, 0x00]))
                self._sock.close()
            except OSError:
                pass
            self._sock = None


@dataclass
class Publisher:
    """Bounded-queue MQTT publisher with reconnect backoff.

    Drive it with ``offer_status``/``offer_event`` from the pipeline and
    ``pump(now)`` from its own loop (or the same loop in replay).  The
    clock is injectable so outage behavior is testable without wall time.
    """

    cfg: MqttConfig
    client_factory: object = None      # callable () -> client
    clock: object = time.monotonic
    connected: bool = False
    dropped: int = 0
    published: int = 0
    _queue: list = field(default_factory=list)
    _client: object = None
    _backoff: float = 1.0
    _next_connect_at: float = 0.0
    _last_status_at: dict = field(default_factory=dict)

    def _make_client(self):
        if self.client_factory is not None:
            return self.client_factory()
        return MiniMqttClient(self.cfg.host, self.cfg.port, self.cfg.client_id)

    def _enqueue(self, topic, payload, qos, retain):
        if len(self._queue) >= self.cfg.queue_limit:
            self._queue.pop(0)
            self.dropped += 1
        self._queue.append((topic, payload, qos, retain))

    def offer_status(self, status: ZoneStatus):
        now = self.clock()
        last = self._last_status_at.get(status.zone_id)
        if last is not None and now - last < self.cfg.publish_period:
            return
        self._last_status_at[status.zone_id] = now
        self._enqueue(status_topic(self.cfg.topic_prefix, status.zone_id),
                      serialize_status(status), self.cfg.qos_status,
                      self.cfg.retain_status)

    def offer_event(self, event: OccupancyEvent):
        self._enqueue(event_topic(self.cfg.topic_prefix, event.zone_id),
                      serialize_event(event), self.cfg.qos_event, False)

    def pump(self, now: float | None = None):
        """One maintenance step: reconnect if due, then drain the queue."""
        if now is None:
            now = self.clock()
        if not self.connected:
            if now < self._next_connect_at:
                return
            try:
                self._client = self._make_client()
                self._client.connect()
                self.connected = True
                self._backoff = 1.0
            except (OSError, ConnectionError):
                self._client = None
                self._next_connect_at = now + self._backoff
                self._backoff = min(self._backoff * 2.0, BACKOFF_CAP)
                return
        while self._queue:
            topic, payload, qos, retain = self._queue[0]
            try:
                self._client.publish(topic, payload, qos, retain)
            except (OSError, ConnectionError):
                self.connected = False
                self._client = None
                self._next_connect_at = now + self._backoff
                self._backoff = min(self._backoff * 2.0, BACKOFF_CAP)
                return
            self._queue.pop(0)
            self.published += 1

    def close(self):
        if self._client is not None:
            try:
                self._client.disconnect()
            except (OSError, ConnectionError):
                pass
        self.connected = False
