"""Client-side topic gateway.

Decoded telemetry fans out to named topics (otter_gps, otter_gps_time,
otter_imu, otter_status, otter_cogsog); command topics (drift_cmds,
control_cmds, station_keeping_cmds, course_speed_cmds) are encoded and
relayed immediately, exactly once per publish call. Resend cadence is
the publisher's responsibility.

Decode failures increment a counter and are otherwise ignored: corrupt
traffic must never take the client down.
"""

from __future__ import annotations

import threading
from dataclasses import dataclass
from typing import Callable, Iterable

from . import codec, transport

TELEMETRY_TOPICS = ("otter_gps", "otter_gps_time", "otter_imu",
                    "otter_status", "otter_cogsog")
COMMAND_TOPICS = ("drift_cmds", "control_cmds", "station_keeping_cmds",
                  "course_speed_cmds")
SYNC_TOPICS = ("otter_gps", "otter_imu", "otter_cogsog")

_COMMAND_TYPE = {
    "drift_cmds": codec.DriftCmd,
    "control_cmds": codec.ManualCmd,
    "station_keeping_cmds": codec.StationKeepCmd,
    "course_speed_cmds": codec.CourseSpeedCmd,
}

DEFAULT_SLOP = 0.06  # s, at the 10 Hz telemetry operating point


class UsageError(ValueError):
    """Bad topic name or topic/payload mismatch."""


@dataclass(frozen=True)
class TopicSample:
    topic: str
    stamp: float  # monotonic receive time, s
    payload: dict


@dataclass(frozen=True)
class SyncedSample:
    gps: dict
    imu: dict
    cogsog: dict
    stamp: float  # pivot = newest constituent stamp


def _topic_samples(msg: codec.OtterMessage, stamp: float) -> list[TopicSample]:
    if isinstance(msg, codec.PosReport):
        return [
            TopicSample("otter_gps", stamp,
                        {"utc": msg.utc, "lat": msg.lat, "lon": msg.lon,
                         "alt": msg.alt}),
            TopicSample("otter_cogsog", stamp,
                        {"utc": msg.utc, "cog": msg.cog, "sog": msg.sog}),
        ]
    if isinstance(msg, codec.AttReport):
        return [TopicSample("otter_imu", stamp,
                            {"utc": msg.utc, "roll": msg.roll,
                             "pitch": msg.pitch, "yaw": msg.yaw,
                             "p": msg.p, "q": msg.q, "r": msg.r})]
    if isinstance(msg, codec.StatusReport):
        return [TopicSample("otter_status", stamp,
                            {"mode": msg.mode, "rpm_port": msg.rpm_port,
                             "rpm_stbd": msg.rpm_stbd, "temp": msg.temp,
                             "battery": msg.battery, "power": msg.power})]
    if isinstance(msg, codec.TimeReport):
        return [TopicSample("otter_gps_time", stamp,
                            {"utc_date": msg.utc_date,
                             "utc_time": msg.utc_time})]
    return []


class ApproxTimeSync:
    """Newest-within-window matcher over a set of telemetry topics.

    Emits a SyncedSample whenever the newest unused sample of every
    requested topic falls inside a slop-wide window; each sample is
    consumed by at most one emission, and emissions are nondecreasing
    in pivot stamp.
    """

    def __init__(self, topics: Iterable[str], slop: float,
                 callback: Callable[[SyncedSample], None]):
        topics = tuple(topics)
        if not topics:
            raise UsageError("empty synchronization topic set")
        bad = set(topics) - set(SYNC_TOPICS)
        if bad:
            raise UsageError(f"cannot synchronize topics: {sorted(bad)}")
        if slop <= 0:
            raise UsageError("slop must be positive")
        self.topics = topics
        self.slop = slop
        self.callback = callback
        self._latest: dict[str, TopicSample] = {}

    def offer(self, sample: TopicSample) -> None:
        if sample.topic not in self.topics:
            return
        self._latest[sample.topic] = sample
        if len(self._latest) < len(self.topics):
            return
        stamps = [s.stamp for s in self._latest.values()]
        if max(stamps) - min(stamps) <= self.slop:
            by_topic = dict(self._latest)
            self._latest.clear()

            def payload(name: str) -> dict:
                sample_ = by_topic.get(name)
                return sample_.payload if sample_ is not None else {}

            self.callback(SyncedSample(gps=payload("otter_gps"),
                                       imu=payload("otter_imu"),
                                       cogsog=payload("otter_cogsog"),
                                       stamp=max(stamps)))


class TopicGateway:
    """Transport-agnostic dispatch core: feed wire lines in, invoke
    topic consumers and synchronizers from the feeding context."""

    def __init__(self, command_sender: Callable[[str], None] | None = None):
        self._subs: dict[str, list[Callable[[TopicSample], None]]] = {}
        self._syncs: list[ApproxTimeSync] = []
        self._command_sender = command_sender
        self.decode_errors = 0

    def subscribe(self, topic: str,
                  consumer: Callable[[TopicSample], None]) -> None:
        if topic in COMMAND_TOPICS:
            raise UsageError(f"cannot subscribe to command topic {topic!r}")
        if topic not in TELEMETRY_TOPICS:
            raise UsageError(f"unknown topic {topic!r}")
        self._subs.setdefault(topic, []).append(consumer)

    def synchronize(self, topics: Iterable[str], slop: float,
                    consumer: Callable[[SyncedSample], None]) -> ApproxTimeSync:
        sync = ApproxTimeSync(topics, slop, consumer)
        self._syncs.append(sync)
        return sync

    def feed_line(self, line: str, stamp: float) -> None:
        try:
            msg = codec.decode_sentence(line)
        except codec.CodecError:
            self.decode_errors += 1
            return
        for sample in _topic_samples(msg, stamp):
            for consumer in self._subs.get(sample.topic, ()):
                consumer(sample)
            for sync in self._syncs:
                sync.offer(sample)

    def publish_command(self, topic: str, payload: codec.OtterMessage) -> str:
        """Encode and relay one command; returns the wire line sent."""
        expected = _COMMAND_TYPE.get(topic)
        if expected is None:
            raise UsageError(f"not a command topic: {topic!r}")
        if not isinstance(payload, expected):
            raise UsageError(
                f"topic {topic!r} expects {expected.__name__}, "
                f"got {type(payload).__name__}")
        line = codec.encode_sentence(payload)  # raises before anything is sent
        if self._command_sender is None:
            raise UsageError("gateway has no command sender attached")
        self._command_sender(line)
        return line


class BackseatClient(TopicGateway):
    """Socket-backed gateway: listens for telemetry on one UDP port and
    sends commands to another.

    Consumers run on the single internal dispatch thread; publish_command
    may be called from any context.
    """

    def __init__(self,
                 telemetry_endpoint: transport.Endpoint | None = None,
                 command_endpoint: transport.Endpoint | None = None):
        self._cmd_endpoint = (command_endpoint
                              or transport.default_command_endpoint())
        self._cmd_sock = None
        super().__init__(command_sender=self._send_command)
        self._listener = transport.open_listener(
            telemetry_endpoint or transport.default_telemetry_endpoint())
        import socket as _socket
        self._cmd_sock = _socket.socket(_socket.AF_INET, _socket.SOCK_DGRAM)
        self._cmd_lock = threading.Lock()
        self._stop = threading.Event()
        self._thread = threading.Thread(target=self._dispatch_loop,
                                        daemon=True)
        self._thread.start()

    def _send_command(self, line: str) -> None:
        if self._cmd_sock is None:
            raise transport.TransportClosedError("client closed")
        with self._cmd_lock:
            self._cmd_sock.sendto(line.encode("ascii"),
                                  self._cmd_endpoint.addr)

    def _dispatch_loop(self) -> None:
        while not self._stop.is_set():
            try:
                for line, stamp in self._listener.poll(0.05):
                    self.feed_line(line, stamp)
            except transport.TransportError:
                return

    def close(self) -> None:
        self._stop.set()
        self._thread.join(timeout=2.0)
        self._listener.close()
        if self._cmd_sock is not None:
            self._cmd_sock.close()
            self._cmd_sock = None


def connect(telemetry_endpoint: transport.Endpoint | None = None,
            command_endpoint: transport.Endpoint | None = None
            ) -> BackseatClient:
    return BackseatClient(telemetry_endpoint, command_endpoint)
