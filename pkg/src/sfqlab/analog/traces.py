"""Waveform dumps: CSV and a compact binary format.

Binary layout (all little-endian)::

    magic     4 bytes   b"SFQT"
    version   uint16    1
    reserved  uint16    0
    t0        float64   first sample time (s)
    dt        float64   sample spacing (s)
    samples   uint64    samples per channel
    channels  uint32    channel count
    then per channel: uint16 name length, UTF-8 name
    then channel data, channel-major, float64

Channel names are ``phase:<junction>``, ``vj:<junction>`` (junction voltage),
``v:<node>`` (node voltage) and ``slips:<junction>``.
"""

from __future__ import annotations

import csv
import io
import struct

import numpy as np

from .solver import TransientResult

MAGIC = b"SFQT"
VERSION = 1
_HEAD = struct.Struct("<4sHHddQI")


class TraceFormatError(ValueError):
    pass


def channel(tr: TransientResult, name: str) -> np.ndarray:
    kind, _, ref = name.partition(":")
    if kind == "phase":
        return tr.phases[:, tr.junction(ref)]
    if kind == "vj":
        return tr.junction_volts[:, tr.junction(ref)]
    if kind == "slips":
        return tr.slips[:, tr.junction(ref)].astype(float)
    if kind == "v":
        try:
            return tr.voltages[:, tr.node_names.index(ref.lower())]
        except ValueError:
            raise KeyError(f"no node {ref!r}") from None
    raise KeyError(f"unknown channel {name!r}")


def default_channels(tr: TransientResult) -> list[str]:
    names = [f"phase:{j}" for j in tr.junction_names]
    names += [f"v:{n}" for n in tr.node_names[1:]]
    return names


def write_csv(tr: TransientResult, fh, channels: list[str] | None = None) -> None:
    channels = channels or default_channels(tr)
    data = [channel(tr, c) for c in channels]
    w = csv.writer(fh, lineterminator="\r\n")
    w.writerow(["time", *channels])
    for i, t in enumerate(tr.time):
        w.writerow([repr(float(t))] + [repr(float(d[i])) for d in data])


def to_csv(tr: TransientResult, channels: list[str] | None = None) -> str:
    buf = io.StringIO()
    write_csv(tr, buf, channels)
    return buf.getvalue()


def to_binary(tr: TransientResult, channels: list[str] | None = None) -> bytes:
    channels = channels or default_channels(tr)
    n = len(tr.time)
    dt = float(tr.time[1] - tr.time[0]) if n > 1 else 0.0
    parts = [_HEAD.pack(MAGIC, VERSION, 0, float(tr.time[0]), dt, n, len(channels))]
    for c in channels:
        raw = c.encode("utf-8")
        parts.append(struct.pack("<H", len(raw)) + raw)
    for c in channels:
        parts.append(np.ascontiguousarray(channel(tr, c), dtype="<f8").tobytes())
    return b"".join(parts)


def read_binary(data: bytes) -> tuple[np.ndarray, dict[str, np.ndarray]]:
    """Parse a binary dump into (time grid, channel name -> samples)."""
    if len(data) < _HEAD.size:
        raise TraceFormatError("truncated header")
    magic, version, _, t0, dt, n, nch = _HEAD.unpack_from(data)
    if magic != MAGIC:
        raise TraceFormatError("not an SFQT trace")
    if version != VERSION:
        raise TraceFormatError(f"unsupported trace version {version}")
    pos = _HEAD.size
    names = []
    for _ in range(nch):
        (ln,) = struct.unpack_from("<H", data, pos)
        pos += 2
        names.append(data[pos : pos + ln].decode("utf-8"))
        pos += ln
    need = pos + 8 * n * nch
    if len(data) != need:
        raise TraceFormatError(f"expected {need} bytes, got {len(data)}")
    arr = np.frombuffer(data, dtype="<f8", count=n * nch, offset=pos).reshape(nch, n)
    time = t0 + dt * np.arange(n)
    return time, {name: arr[i].copy() for i, name in enumerate(names)}
