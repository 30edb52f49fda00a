"""UDP transport: rate-limited telemetry broadcaster and command
listener, with an injectable sender-side fault model (dropout windows,
random loss, constant latency).

One sentence per datagram. Receive timestamps are monotonic-clock
seconds; UTC only ever appears inside message payloads.
"""

from __future__ import annotations

import heapq
import os
import random
import socket
import threading
import time
from dataclasses import dataclass

DEFAULT_TELEM_PORT = 10010
DEFAULT_CMD_PORT = 10011

RATE_MIN_HZ = 1.0
RATE_MAX_HZ = 20.0


class TransportError(OSError):
    """Socket-level failure (bind, send)."""


class TransportClosedError(TransportError):
    """Handle used after close."""


class ConfigError(ValueError):
    """Invalid endpoint, rate, or fault profile."""


@dataclass(frozen=True)
class Endpoint:
    host: str
    port: int

    def __post_init__(self):
        if not 1 <= self.port <= 65535:
            raise ConfigError(f"port {self.port} outside 1..65535")

    @property
    def addr(self) -> tuple[str, int]:
        return (self.host, self.port)


def _endpoint_from_env(var: str, default_port: int) -> Endpoint:
    raw = os.environ.get(var)
    if not raw:
        return Endpoint("127.0.0.1", default_port)
    host, _, port = raw.rpartition(":")
    if not host:
        raise ConfigError(f"{var} must be host:port, got {raw!r}")
    return Endpoint(host, int(port))


def default_telemetry_endpoint() -> Endpoint:
    return _endpoint_from_env("OTTERLINK_TELEM_ADDR", DEFAULT_TELEM_PORT)


def default_command_endpoint() -> Endpoint:
    return _endpoint_from_env("OTTERLINK_CMD_ADDR", DEFAULT_CMD_PORT)


@dataclass(frozen=True)
class RateConfig:
    telemetry_hz: float = 10.0

    def __post_init__(self):
        if not RATE_MIN_HZ <= self.telemetry_hz <= RATE_MAX_HZ:
            raise ConfigError(
                f"telemetry rate {self.telemetry_hz} Hz outside "
                f"[{RATE_MIN_HZ:g}, {RATE_MAX_HZ:g}]")


@dataclass(frozen=True)
class FaultProfile:
    dropout_windows: tuple[tuple[float, float], ...] = ()  # (start, duration) s
    loss_prob: float = 0.0
    latency: float = 0.0  # s
    seed: int = 0

    def __post_init__(self):
        if not 0.0 <= self.loss_prob <= 1.0:
            raise ConfigError(f"loss_prob {self.loss_prob} outside [0, 1]")
        if self.latency < 0.0:
            raise ConfigError("latency must be >= 0")
        for start, duration in self.dropout_windows:
            if duration < 0.0:
                raise ConfigError("dropout duration must be >= 0")

    def in_dropout(self, t_rel: float) -> bool:
        return any(start <= t_rel < start + duration
                   for start, duration in self.dropout_windows)


class UdpBroadcaster:
    """Rate-paced UDP sender with sender-side fault shaping.

    One producing context may call send(); the fault profile may be
    swapped atomically from any context.
    """

    def __init__(self, endpoint: Endpoint, rate: RateConfig,
                 fault: FaultProfile | None = None, burst: int = 1):
        if burst < 1:
            raise ConfigError("burst must be >= 1")
        self.endpoint = endpoint
        self.rate = rate
        self.burst = burst  # datagrams allowed per rate interval
        try:
            self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_BROADCAST, 1)
        except OSError as exc:
            raise TransportError(f"socket setup failed: {exc}") from exc
        self._lock = threading.Condition()
        self._queue: list[bytes] = []
        self._delayed: list[tuple[float, int, bytes]] = []  # (due, seq, data)
        self._fault = fault or FaultProfile()
        self._rng = random.Random(self._fault.seed)
        self._seq = 0
        self._closed = False
        self.t0 = time.monotonic()
        self._next_send = self.t0
        self._worker = threading.Thread(target=self._run, daemon=True)
        self._worker.start()

    def send(self, line: str) -> None:
        """Queue one sentence for paced, fault-shaped delivery."""
        with self._lock:
            if self._closed:
                raise TransportClosedError("send on closed broadcaster")
            self._queue.append(line.encode("ascii"))
            self._lock.notify()

    def inject_fault(self, profile: FaultProfile) -> None:
        """Atomically replace the fault profile (and reseed the RNG)."""
        with self._lock:
            if self._closed:
                raise TransportClosedError("inject_fault on closed broadcaster")
            self._fault = profile
            self._rng = random.Random(profile.seed)

    def pending(self) -> int:
        with self._lock:
            return len(self._queue) + len(self._delayed)

    def close(self) -> None:
        with self._lock:
            if self._closed:
                return
            self._closed = True
            self._lock.notify()
        self._worker.join(timeout=2.0)
        self._sock.close()

    def _run(self) -> None:
        interval = 1.0 / self.rate.telemetry_hz
        while True:
            to_send: list[bytes] = []
            with self._lock:
                while True:
                    if self._closed:
                        return
                    now = time.monotonic()
                    while self._delayed and self._delayed[0][0] <= now:
                        to_send.append(heapq.heappop(self._delayed)[2])
                    if to_send:
                        break
                    wake = None
                    # one rate slot admits up to `burst` queued lines
                    # (burst=1 gives strict per-datagram pacing)
                    if self._queue:
                        if now >= self._next_send:
                            chunk = self._queue[:self.burst]
                            del self._queue[:self.burst]
                            self._next_send = max(self._next_send + interval,
                                                  now)
                            fault = self._fault
                            for data in chunk:
                                if fault.in_dropout(now - self.t0):
                                    continue
                                if (fault.loss_prob > 0.0
                                        and self._rng.random()
                                        < fault.loss_prob):
                                    continue
                                if fault.latency > 0.0:
                                    self._seq += 1
                                    heapq.heappush(
                                        self._delayed,
                                        (now + fault.latency, self._seq,
                                         data))
                                    continue
                                to_send.append(data)
                            if to_send:
                                break
                            continue
                        wake = self._next_send - now
                    if self._delayed:
                        due = self._delayed[0][0] - now
                        wake = due if wake is None else min(wake, due)
                    self._lock.wait(timeout=wake)
            for data in to_send:
                try:
                    self._sock.sendto(data, self.endpoint.addr)
                except OSError:
                    pass  # transient send errors shed the datagram


class UdpListener:
    """Bound UDP receiver yielding (line, monotonic receive time)."""

    def __init__(self, endpoint: Endpoint):
        self.endpoint = endpoint
        try:
            self._sock = socket.socket(socket.AF_INET, socket.SOCK_DGRAM)
            self._sock.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 0)
            self._sock.bind(endpoint.addr)
        except OSError as exc:
            raise TransportError(
                f"bind {endpoint.addr} failed: {exc}") from exc
        self._closed = False

    def poll(self, timeout: float) -> list[tuple[str, float]]:
        """Collect all datagrams arriving before the deadline."""
        if self._closed:
            raise TransportClosedError("poll on closed listener")
        deadline = time.monotonic() + timeout
        out: list[tuple[str, float]] = []
        while True:
            remaining = deadline - time.monotonic()
            if remaining <= 0:
                return out
            self._sock.settimeout(remaining)
            try:
                data, _ = self._sock.recvfrom(65536)
            except socket.timeout:
                return out
            except OSError:
                if self._closed:
                    raise TransportClosedError("listener closed during poll")
                raise
            out.append((data.decode("ascii", errors="replace"),
                        time.monotonic()))

    def close(self) -> None:
        self._closed = True
        self._sock.close()


def open_broadcaster(endpoint: Endpoint, rate: RateConfig,
                     fault: FaultProfile | None = None,
                     burst: int = 1) -> UdpBroadcaster:
    return UdpBroadcaster(endpoint, rate, fault, burst)


def open_listener(endpoint: Endpoint) -> UdpListener:
    return UdpListener(endpoint)
