"""NMEA-0183-style sentence codec for the Otter backseat link.

Sentences use talker ``POT`` with tags POS, ATT, STA, TIM and CMD
(subcommands DRIFT / MAN / SK / CRS).  Framing follows the usual NMEA
convention: ``$`` + payload + ``*`` + two uppercase hex digits (XOR of
the payload bytes) + CRLF.

Numeric fields are rendered at fixed precision so that an
encode/decode roundtrip is exact at the rendered precision:

====================  ========
field class           decimals
====================  ========
latitude / longitude  7
angles, angular rate  2
speeds                2
normalized forces     3
altitude (m)          2
UTC seconds-of-day    2
temp / battery / W    1
RPM                   integer
====================  ========

See docs/protocol.md for the full grammar in ABNF.
"""

from __future__ import annotations

from dataclasses import dataclass, fields
from typing import Union

V_MAX = 3.0  # m/s, commanded-speed ceiling shared with the vessel model

CRLF = "\r\n"

MODE_TAGS = ("DRIFT", "MAN", "SK", "CRS")


class CodecError(ValueError):
    """Base class for all encode/decode failures."""


class FramingError(CodecError):
    """Line is not a well-formed ``$payload*hh`` frame."""


class ChecksumError(CodecError):
    """Frame checksum does not match the payload."""


class UnknownSentenceError(CodecError):
    """Talker/tag (or CMD subcommand) is not part of the catalog."""


class MalformedFieldError(CodecError):
    """Wrong field count or a field failed to parse."""


class RangeError(CodecError):
    """A field value violates its documented range."""


@dataclass(frozen=True)
class PosReport:
    """Position fix broadcast: $POTPOS."""

    utc: float  # seconds of day
    lat: float  # deg
    lon: float  # deg
    alt: float  # m
    sog: float  # m/s
    cog: float  # deg, [0, 360)


@dataclass(frozen=True)
class AttReport:
    """Orientation and angular-rate broadcast: $POTATT."""

    utc: float
    roll: float   # deg
    pitch: float  # deg
    yaw: float    # deg, [0, 360)
    p: float      # deg/s
    q: float      # deg/s
    r: float      # deg/s


@dataclass(frozen=True)
class StatusReport:
    """Mode / motor / battery / power broadcast: $POTSTA."""

    mode: str       # one of MODE_TAGS
    rpm_port: int   # unsigned rev/min
    rpm_stbd: int   # unsigned rev/min
    temp: float     # degC
    battery: float  # percent
    power: float    # W


@dataclass(frozen=True)
class TimeReport:
    """UTC date/time broadcast: $POTTIM."""

    utc_date: int   # yyyymmdd
    utc_time: float  # seconds of day


@dataclass(frozen=True)
class DriftCmd:
    """Motors-off command: $POTCMD,DRIFT."""

    on: bool


@dataclass(frozen=True)
class ManualCmd:
    """Direct motor input command: $POTCMD,MAN.

    ``y`` (sway) is carried on the wire but has no effect downstream.
    """

    x: float  # surge force, [-1, 1]
    y: float  # ignored
    z: float  # torque, [-1, 1]


@dataclass(frozen=True)
class StationKeepCmd:
    """GNSS station-keeping command: $POTCMD,SK."""

    lat: float
    lon: float
    speed: float  # m/s cap, [0, V_MAX]


@dataclass(frozen=True)
class CourseSpeedCmd:
    """Course-and-speed command: $POTCMD,CRS."""

    course: float  # deg, [0, 360]
    speed: float   # m/s, [0, V_MAX]


OtterMessage = Union[
    PosReport, AttReport, StatusReport, TimeReport,
    DriftCmd, ManualCmd, StationKeepCmd, CourseSpeedCmd,
]

COMMAND_TYPES = (DriftCmd, ManualCmd, StationKeepCmd, CourseSpeedCmd)
TELEMETRY_TYPES = (PosReport, AttReport, StatusReport, TimeReport)


def _check_payload_chars(payload: str) -> None:
    try:
        payload.encode("ascii")
    except UnicodeEncodeError as exc:
        raise FramingError(f"payload is not ASCII: {payload!r}") from exc
    for bad in "$*\r\n":
        if bad in payload:
            raise FramingError(f"payload contains forbidden character {bad!r}")


def compute_checksum(payload: str) -> str:
    """XOR of all payload bytes, as two uppercase hex digits."""
    _check_payload_chars(payload)
    acc = 0
    for byte in payload.encode("ascii"):
        acc ^= byte
    return f"{acc:02X}"


def frame(payload: str) -> str:
    """Wrap a payload into a complete wire line with checksum and CRLF."""
    return f"${payload}*{compute_checksum(payload)}{CRLF}"


def unframe(line: str) -> str:
    """Validate framing and checksum, return the bare payload."""
    body = line
    if body.endswith(CRLF):
        body = body[:-2]
    elif body.endswith("\n"):
        body = body.rstrip("\r\n")
    if not body.startswith("$"):
        raise FramingError("line does not start with '$'")
    body = body[1:]
    if body.count("*") != 1:
        raise FramingError("expected exactly one '*' delimiter")
    payload, checksum = body.split("*")
    if len(checksum) != 2 or any(c not in "0123456789ABCDEF" for c in checksum):
        raise FramingError(f"bad checksum field {checksum!r}")
    expect = compute_checksum(payload)
    if checksum != expect:
        raise ChecksumError(f"checksum {checksum} != computed {expect}")
    return payload


def _require(cond: bool, field: str, detail: str) -> None:
    if not cond:
        raise RangeError(f"field {field!r}: {detail}")


def _finite(value: float) -> bool:
    return value == value and abs(value) != float("inf")


def validate(msg: OtterMessage) -> None:
    """Raise RangeError if any field violates the variant's invariants."""
    for f in fields(msg):
        val = getattr(msg, f.name)
        if isinstance(val, float):
            _require(_finite(val), f.name, "must be finite")
    if isinstance(msg, PosReport):
        _require(0.0 <= msg.utc < 86400.0, "utc", "seconds-of-day in [0, 86400)")
        _require(-90.0 <= msg.lat <= 90.0, "lat", "degrees in [-90, 90]")
        _require(-180.0 <= msg.lon <= 180.0, "lon", "degrees in [-180, 180]")
        _require(msg.sog >= 0.0, "sog", "must be nonnegative")
        _require(0.0 <= msg.cog < 360.0, "cog", "degrees in [0, 360)")
    elif isinstance(msg, AttReport):
        _require(0.0 <= msg.utc < 86400.0, "utc", "seconds-of-day in [0, 86400)")
        _require(0.0 <= msg.yaw < 360.0, "yaw", "degrees in [0, 360)")
    elif isinstance(msg, StatusReport):
        _require(msg.mode in MODE_TAGS, "mode", f"one of {MODE_TAGS}")
        _require(msg.rpm_port >= 0, "rpm_port", "unsigned")
        _require(msg.rpm_stbd >= 0, "rpm_stbd", "unsigned")
        _require(0.0 <= msg.battery <= 100.0, "battery", "percent in [0, 100]")
    elif isinstance(msg, TimeReport):
        _require(19000101 <= msg.utc_date <= 99991231, "utc_date", "yyyymmdd")
        _require(0.0 <= msg.utc_time < 86400.0, "utc_time",
                 "seconds-of-day in [0, 86400)")
    elif isinstance(msg, ManualCmd):
        _require(-1.0 <= msg.x <= 1.0, "x", "in [-1, 1]")
        _require(-1.0 <= msg.z <= 1.0, "z", "in [-1, 1]")
    elif isinstance(msg, StationKeepCmd):
        _require(-90.0 <= msg.lat <= 90.0, "lat", "degrees in [-90, 90]")
        _require(-180.0 <= msg.lon <= 180.0, "lon", "degrees in [-180, 180]")
        _require(0.0 <= msg.speed <= V_MAX, "speed", f"in [0, {V_MAX}]")
    elif isinstance(msg, CourseSpeedCmd):
        _require(0.0 <= msg.course <= 360.0, "course", "degrees in [0, 360]")
        _require(0.0 <= msg.speed <= V_MAX, "speed", f"in [0, {V_MAX}]")
    elif isinstance(msg, DriftCmd):
        pass
    else:
        raise UnknownSentenceError(f"not an OtterMessage: {type(msg).__name__}")


def encode_sentence(msg: OtterMessage) -> str:
    """Render a message as a complete wire line (``$...*hh\\r\\n``)."""
    validate(msg)
    if isinstance(msg, PosReport):
        payload = (f"POTPOS,{msg.utc:.2f},{msg.lat:.7f},{msg.lon:.7f},"
                   f"{msg.alt:.2f},{msg.sog:.2f},{msg.cog:.2f}")
    elif isinstance(msg, AttReport):
        payload = (f"POTATT,{msg.utc:.2f},{msg.roll:.2f},{msg.pitch:.2f},"
                   f"{msg.yaw:.2f},{msg.p:.2f},{msg.q:.2f},{msg.r:.2f}")
    elif isinstance(msg, StatusReport):
        payload = (f"POTSTA,{msg.mode},{msg.rpm_port:d},{msg.rpm_stbd:d},"
                   f"{msg.temp:.1f},{msg.battery:.1f},{msg.power:.1f}")
    elif isinstance(msg, TimeReport):
        payload = f"POTTIM,{msg.utc_date:08d},{msg.utc_time:.2f}"
    elif isinstance(msg, DriftCmd):
        payload = f"POTCMD,DRIFT,{1 if msg.on else 0}"
    elif isinstance(msg, ManualCmd):
        payload = f"POTCMD,MAN,{msg.x:.3f},{msg.y:.3f},{msg.z:.3f}"
    elif isinstance(msg, StationKeepCmd):
        payload = f"POTCMD,SK,{msg.lat:.7f},{msg.lon:.7f},{msg.speed:.2f}"
    else:
        payload = f"POTCMD,CRS,{msg.course:.2f},{msg.speed:.2f}"
    return frame(payload)


def _floats(parts, n, tag):
    if len(parts) != n:
        raise MalformedFieldError(f"{tag}: expected {n} fields, got {len(parts)}")
    out = []
    for part in parts:
        try:
            out.append(float(part))
        except ValueError as exc:
            raise MalformedFieldError(f"{tag}: bad numeric field {part!r}") from exc
    return out


def _ints(parts, tag):
    out = []
    for part in parts:
        try:
            out.append(int(part))
        except ValueError as exc:
            raise MalformedFieldError(f"{tag}: bad integer field {part!r}") from exc
    return out


def decode_sentence(line: str) -> OtterMessage:
    """Parse and validate one wire line into its message variant.

    Raises a CodecError subclass on any failure; never returns a
    partially populated message.
    """
    payload = unframe(line)
    parts = payload.split(",")
    tag = parts[0]
    args = parts[1:]
    if tag == "POTPOS":
        msg: OtterMessage = PosReport(*_floats(args, 6, tag))
    elif tag == "POTATT":
        msg = AttReport(*_floats(args, 7, tag))
    elif tag == "POTSTA":
        if len(args) != 6:
            raise MalformedFieldError(f"{tag}: expected 6 fields, got {len(args)}")
        rpm_port, rpm_stbd = _ints(args[1:3], tag)
        temp, battery, power = _floats(args[3:6], 3, tag)
        msg = StatusReport(args[0], rpm_port, rpm_stbd, temp, battery, power)
    elif tag == "POTTIM":
        if len(args) != 2:
            raise MalformedFieldError(f"{tag}: expected 2 fields, got {len(args)}")
        (utc_date,) = _ints(args[:1], tag)
        (utc_time,) = _floats(args[1:], 1, tag)
        msg = TimeReport(utc_date, utc_time)
    elif tag == "POTCMD":
        if not args:
            raise MalformedFieldError("POTCMD: missing subcommand")
        sub, rest = args[0], args[1:]
        if sub == "DRIFT":
            if len(rest) != 1 or rest[0] not in ("0", "1"):
                raise MalformedFieldError("POTCMD,DRIFT: expected one 0/1 flag")
            msg = DriftCmd(rest[0] == "1")
        elif sub == "MAN":
            msg = ManualCmd(*_floats(rest, 3, "POTCMD,MAN"))
        elif sub == "SK":
            msg = StationKeepCmd(*_floats(rest, 3, "POTCMD,SK"))
        elif sub == "CRS":
            msg = CourseSpeedCmd(*_floats(rest, 2, "POTCMD,CRS"))
        else:
            raise UnknownSentenceError(f"unknown POTCMD subcommand {sub!r}")
    else:
        raise UnknownSentenceError(f"unknown sentence tag {tag!r}")
    validate(msg)
    return msg
