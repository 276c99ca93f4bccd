"""Time-tag records, streams and their on-disk formats.

Timestamps are integer picoseconds from the start of the run. A stream holds
two parallel arrays (``channels``, ``times``) rather than a list of objects so
that million-tag runs stay cheap.
"""

from __future__ import annotations

import enum
import io
import struct
from dataclasses import dataclass, field
from pathlib import Path
from typing import NamedTuple

import numpy as np

from .errors import ValidationError

__all__ = [
    "Channel",
    "TimeTag",
    "TimeTagStream",
    "Violation",
    "merge_streams",
    "validate_stream",
    "write_text",
    "read_text",
    "write_binary",
    "read_binary",
    "read_stream",
    "BINARY_MAGIC",
]


class Channel(enum.IntEnum):
    STOKES = 0
    ANTI_STOKES = 1


class TimeTag(NamedTuple):
    channel: Channel
    t: int


@dataclass(frozen=True)
class TimeTagStream:
    """Ordered detection events for one run.

    ``channels`` is uint8 (0 = Stokes, 1 = anti-Stokes), ``times`` is int64 ps.
    The arrays are made read-only on construction.
    """

    duration_ps: int
    channels: np.ndarray
    times: np.ndarray
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        ch = np.ascontiguousarray(self.channels, dtype=np.uint8)
        t = np.ascontiguousarray(self.times, dtype=np.int64)
        if ch.shape != t.shape or ch.ndim != 1:
            raise ValidationError("channels and times must be 1-d arrays of equal length")
        ch.flags.writeable = False
        t.flags.writeable = False
        object.__setattr__(self, "channels", ch)
        object.__setattr__(self, "times", t)
        object.__setattr__(self, "duration_ps", int(self.duration_ps))

    @classmethod
    def from_tags(cls, tags, duration_ps: int, meta: dict | None = None) -> TimeTagStream:
        tags = list(tags)
        ch = np.array([int(tg[0]) for tg in tags], dtype=np.uint8)
        t = np.array([int(tg[1]) for tg in tags], dtype=np.int64)
        return cls(duration_ps, ch, t, dict(meta or {}))

    @classmethod
    def single_channel(cls, channel: Channel, times, duration_ps: int,
                       meta: dict | None = None) -> TimeTagStream:
        times = np.asarray(times, dtype=np.int64)
        return cls(duration_ps, np.full(times.shape, int(channel), dtype=np.uint8),
                   times, dict(meta or {}))

    def __len__(self) -> int:
        return int(self.times.size)

    @property
    def tags(self) -> list[TimeTag]:
        return [TimeTag(Channel(int(c)), int(t)) for c, t in zip(self.channels, self.times)]

    def channel_times(self, channel: Channel) -> np.ndarray:
        mask = self.channels == int(channel)
        if mask.all():
            return self.times
        return self.times[mask]

    def count(self, channel: Channel | None = None) -> int:
        if channel is None:
            return len(self)
        return int(np.count_nonzero(self.channels == int(channel)))

    def __eq__(self, other):
        if not isinstance(other, TimeTagStream):
            return NotImplemented
        return (self.duration_ps == other.duration_ps
                and np.array_equal(self.channels, other.channels)
                and np.array_equal(self.times, other.times)
                and self.meta == other.meta)

    __hash__ = None


class Violation(NamedTuple):
    index: int
    kind: str  # "order" or "out of range"
    detail: str


def merge_streams(a: TimeTagStream, b: TimeTagStream) -> TimeTagStream:
    """Time-sorted union of two streams; on equal timestamps tags of ``a`` come first."""
    if a.duration_ps != b.duration_ps:
        raise ValidationError(
            f"cannot merge streams of different duration ({a.duration_ps} vs {b.duration_ps} ps)")
    t = np.concatenate([a.times, b.times])
    ch = np.concatenate([a.channels, b.channels])
    order = np.argsort(t, kind="stable")
    meta = {**b.meta, **a.meta}
    return TimeTagStream(a.duration_ps, ch[order], t[order], meta)


def validate_stream(s: TimeTagStream) -> list[Violation]:
    """Every out-of-range or out-of-order tag, by index. An empty list means ok."""
    out = []
    t = s.times
    bad_range = np.flatnonzero((t < 0) | (t >= s.duration_ps))
    for i in bad_range:
        out.append(Violation(int(i), "out of range",
                             f"t={int(t[i])} not in [0, {s.duration_ps})"))
    bad_order = np.flatnonzero(np.diff(t) < 0) + 1
    for i in bad_order:
        out.append(Violation(int(i), "order", f"t={int(t[i])} < previous {int(t[i - 1])}"))
    bad_ch = np.flatnonzero(s.channels > 1)
    for i in bad_ch:
        out.append(Violation(int(i), "channel", f"unknown channel {int(s.channels[i])}"))
    out.sort(key=lambda v: v.index)
    return out


# --- file formats -----------------------------------------------------------

BINARY_MAGIC = b"BPHTTAG1"
_RECORD = np.dtype([("channel", "u1"), ("t", "<u8")])


def _header_lines(s: TimeTagStream) -> list[str]:
    meta = {k: v for k, v in s.meta.items() if k != "duration_ps"}
    lines = [f"duration_ps={s.duration_ps}"]
    lines += [f"{k}={v}" for k, v in sorted(meta.items())]
    return lines


def _parse_header(lines) -> tuple[int, dict]:
    meta = {}
    for line in lines:
        key, sep, value = line.partition("=")
        if not sep:
            continue
        meta[key.strip()] = value.strip()
    if "duration_ps" not in meta:
        raise ValidationError("time-tag header lacks duration_ps")
    duration = int(meta.pop("duration_ps"))
    return duration, meta


def write_text(s: TimeTagStream, path) -> None:
    """``# key=value`` header lines, then ``channel,t_ps`` records."""
    buf = io.StringIO()
    for line in _header_lines(s):
        buf.write(f"# {line}\n")
    if len(s):
        body = np.char.add(np.char.add(s.channels.astype(str), ","), s.times.astype(str))
        buf.write("\n".join(body.tolist()))
        buf.write("\n")
    Path(path).write_text(buf.getvalue())


def read_text(path) -> TimeTagStream:
    header, ch, t = [], [], []
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                header.append(line[1:].strip())
                continue
            c, sep, ts = line.partition(",")
            if not sep or c.strip() not in ("0", "1"):
                raise ValidationError(f"{path}:{lineno}: malformed record {line!r}")
            ch.append(int(c))
            t.append(int(ts))
    duration, meta = _parse_header(header)
    return TimeTagStream(duration, np.array(ch, dtype=np.uint8), np.array(t, dtype=np.int64), meta)


def write_binary(s: TimeTagStream, path) -> None:
    """Magic (8 bytes) + u64 header length, header text, then packed (u8, u64) records."""
    header = "\n".join(_header_lines(s)).encode()
    rec = np.empty(len(s), dtype=_RECORD)
    rec["channel"] = s.channels
    rec["t"] = s.times.astype(np.uint64)
    with open(path, "wb") as fh:
        fh.write(BINARY_MAGIC)
        fh.write(struct.pack("<Q", len(header)))
        fh.write(header)
        fh.write(rec.tobytes())


def read_binary(path) -> TimeTagStream:
    raw = Path(path).read_bytes()
    if raw[:8] != BINARY_MAGIC:
        raise ValidationError(f"{path}: not a binary time-tag file")
    (hlen,) = struct.unpack("<Q", raw[8:16])
    header = raw[16:16 + hlen].decode().splitlines()
    duration, meta = _parse_header(header)
    body = raw[16 + hlen:]
    if len(body) % _RECORD.itemsize:
        raise ValidationError(f"{path}: truncated record block")
    rec = np.frombuffer(body, dtype=_RECORD)
    return TimeTagStream(duration, rec["channel"].copy(), rec["t"].astype(np.int64), meta)


def read_stream(path) -> TimeTagStream:
    """Read either format, sniffing the magic bytes."""
    with open(path, "rb") as fh:
        head = fh.read(8)
    if head == BINARY_MAGIC:
        return read_binary(path)
    return read_text(path)
