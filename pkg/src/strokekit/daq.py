"""Acquisition-stream decoding and recording file I/O.

Wire format (little-endian, 43 bytes per frame):

    offset  size  field
    0       2     sync bytes 0xAA 0x55
    2       1     frame type, 0x01 = data
    3       2     u16 sequence number
    5       36    18 x u16 ADC codes, sensor-major (s0x s0y s0z s1x ...),
                  only the low 10 bits are meaningful (0..1023)
    41      2     u16 CRC-16/CCITT-FALSE over bytes 2..40 (type..codes)

Fixed-size frames keep resynchronization after corruption trivial at 2 kHz
rates. Codes convert to acceleration via the ratiometric formula
``((code/1023)*v_ref - v_zero_g)/sensitivity * g``.

Recording files (``.htrec``) are a two-line text header (magic + one JSON
object) followed by either a CSV body (one row per sample: time_s, then
ch0_x..chN_z) or a packed little-endian float64 binary body; the header's
``body`` flag selects which. No anti-alias filtering is applied anywhere in
ingest; streams are stored as acquired.
"""
from __future__ import annotations

import io
import json
import struct
from dataclasses import dataclass

import numpy as np

from .errors import (
    BadCrcError,
    BadSyncError,
    CodeOutOfRangeError,
    EmptyStreamError,
    GapTooLargeError,
    MalformedHeaderError,
    TruncatedDataError,
    VersionUnsupportedError,
)
from .model import (
    AXIS_NAMES,
    ChannelLayout,
    DEFAULT_SAMPLE_RATE,
    Recording,
    STANDARD_GRAVITY,
)

SYNC = b"\xaa\x55"
FRAME_TYPE_DATA = 0x01
FRAME_LEN = 43
N_SENSORS = 6
MAX_CODE = 1023

#: Longest run of missing frames bridged by interpolation (8 ms at 2 kHz,
#: well under the 200 ms analysis window).
MAX_GAP_FRAMES = 16

_HEAD = struct.Struct("<BH")
_CODES = struct.Struct("<18H")
_CRC = struct.Struct("<H")

_MAGIC = "#HTREC v"
_VERSION = 1


def _crc_table(poly: int = 0x1021) -> tuple[int, ...]:
    table = []
    for byte in range(256):
        crc = byte << 8
        for _ in range(8):
            crc = ((crc << 1) ^ poly) & 0xFFFF if crc & 0x8000 else (crc << 1) & 0xFFFF
        table.append(crc)
    return tuple(table)


_TABLE = _crc_table()


def crc16(data: bytes, crc: int = 0xFFFF) -> int:
    """CRC-16/CCITT-FALSE (poly 0x1021, init 0xFFFF, no reflection)."""
    for b in data:
        crc = ((crc << 8) & 0xFFFF) ^ _TABLE[((crc >> 8) ^ b) & 0xFF]
    return crc


@dataclass(frozen=True, eq=False)
class Frame:
    """One acquisition frame: sequence number plus 6x3 raw 10-bit codes."""

    seq: int
    samples: np.ndarray  # (6, 3) uint16, values 0..1023

    def __post_init__(self):
        arr = np.asarray(self.samples, dtype=np.uint16)
        if arr.shape != (N_SENSORS, 3):
            raise ValueError(f"samples must have shape ({N_SENSORS}, 3), got {arr.shape}")
        if (arr > MAX_CODE).any():
            raise ValueError("ADC codes must be <= 1023")
        if not 0 <= int(self.seq) <= 0xFFFF:
            raise ValueError("seq must fit in 16 bits")
        arr = arr.copy()
        arr.setflags(write=False)
        object.__setattr__(self, "samples", arr)
        object.__setattr__(self, "seq", int(self.seq))

    def __eq__(self, other):
        return (
            isinstance(other, Frame)
            and self.seq == other.seq
            and np.array_equal(self.samples, other.samples)
        )


def encode_frame(frame: Frame) -> bytes:
    """Serialize a frame to its 43-byte wire form."""
    body = _HEAD.pack(FRAME_TYPE_DATA, frame.seq) + _CODES.pack(
        *frame.samples.reshape(18).tolist()
    )
    return SYNC + body + _CRC.pack(crc16(body))


def decode_frame(data: bytes) -> Frame:
    """Parse one 43-byte frame; sync is checked first, then the CRC, then
    the code range (a CRC-valid frame with a code above 1023 means the
    encoder itself is broken)."""
    if len(data) != FRAME_LEN:
        raise ValueError(f"frame must be exactly {FRAME_LEN} bytes, got {len(data)}")
    if data[:2] != SYNC:
        raise BadSyncError(f"expected sync {SYNC.hex()}, got {data[:2].hex()}")
    body = data[2:-2]
    (declared,) = _CRC.unpack(data[-2:])
    actual = crc16(body)
    if declared != actual:
        raise BadCrcError(f"crc mismatch: frame says {declared:#06x}, computed {actual:#06x}")
    frame_type, seq = _HEAD.unpack(body[:3])
    if frame_type != FRAME_TYPE_DATA:
        raise BadSyncError(f"unknown frame type {frame_type:#04x}")
    codes = np.array(_CODES.unpack(body[3:]), dtype=np.uint16)
    if (codes > MAX_CODE).any():
        bad = int(codes.max())
        raise CodeOutOfRangeError(f"ADC code {bad} exceeds 10-bit range")
    return Frame(seq=seq, samples=codes.reshape(N_SENSORS, 3))


def resync(stream: bytes, start: int = 0) -> int | None:
    """Smallest offset >= ``start`` where a CRC-valid frame begins.

    Returns ``None`` when no complete valid frame remains.
    """
    i = start
    while True:
        idx = stream.find(SYNC, i)
        if idx < 0 or idx + FRAME_LEN > len(stream):
            return None
        try:
            decode_frame(stream[idx : idx + FRAME_LEN])
            return idx
        except CodeOutOfRangeError:
            return idx  # framing is sound; the bad code surfaces on decode
        except (BadSyncError, BadCrcError):
            i = idx + 1


@dataclass
class StreamStats:
    """What resynchronization had to skip while walking a byte stream."""

    frames: int = 0
    skipped_bytes: int = 0
    resync_events: int = 0


def read_frame_stream(stream: bytes) -> tuple[list[Frame], StreamStats]:
    """Decode every valid frame, resynchronizing across corrupt regions."""
    frames: list[Frame] = []
    stats = StreamStats()
    pos = 0
    while True:
        off = resync(stream, pos)
        if off is None:
            stats.skipped_bytes += len(stream) - pos
            break
        if off != pos:
            stats.skipped_bytes += off - pos
            stats.resync_events += 1
        frames.append(decode_frame(stream[off : off + FRAME_LEN]))
        pos = off + FRAME_LEN
    stats.frames = len(frames)
    return frames, stats


@dataclass(frozen=True)
class CalibrationParams:
    """Ratiometric accelerometer calibration.

    ``v_zero_g`` is the per-axis output at rest; defaults are typical values
    for a 3.3 V supply (mid-rail zero-g offset, 300 mV/g sensitivity). Real
    parts deviate per axis, hence everything is configurable.
    """

    v_ref: float = 3.3
    v_zero_g: tuple[float, float, float] = (1.65, 1.65, 1.65)
    sensitivity: float = 0.300
    g: float = STANDARD_GRAVITY

    def __post_init__(self):
        if not self.v_ref > 0:
            raise ValueError("v_ref must be positive")
        if not self.sensitivity > 0:
            raise ValueError("sensitivity must be positive")
        vz = tuple(float(v) for v in self.v_zero_g)
        if len(vz) != 3:
            raise ValueError("v_zero_g needs one value per axis")
        if any(not 0 <= v <= self.v_ref for v in vz):
            raise ValueError("v_zero_g must lie within [0, v_ref]")
        object.__setattr__(self, "v_zero_g", vz)

    def accel(self, code, axis: int):
        """Acceleration in m/s^2 for 10-bit code(s) on one axis."""
        volts = np.asarray(code, dtype=np.float64) / MAX_CODE * self.v_ref
        return (volts - self.v_zero_g[axis]) / self.sensitivity * self.g

    def as_dict(self) -> dict:
        return {
            "v_ref": self.v_ref,
            "v_zero_g": list(self.v_zero_g),
            "sensitivity": self.sensitivity,
            "g": self.g,
        }

    @classmethod
    def from_dict(cls, d) -> "CalibrationParams":
        return cls(
            v_ref=float(d.get("v_ref", 3.3)),
            v_zero_g=tuple(d.get("v_zero_g", (1.65, 1.65, 1.65))),
            sensitivity=float(d.get("sensitivity", 0.300)),
            g=float(d.get("g", STANDARD_GRAVITY)),
        )


def frames_to_recording(
    frames,
    cal: CalibrationParams = CalibrationParams(),
    layout: ChannelLayout | None = None,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
) -> Recording:
    """Convert decoded frames into a calibrated recording.

    Sequence numbers must be contiguous modulo 2^16; runs of up to
    ``MAX_GAP_FRAMES`` missing frames are filled by linear interpolation
    between their neighbors and reported in ``meta`` (gap_events,
    gap_samples). Longer gaps make the segment unusable.
    """
    frames = list(frames)
    if not frames:
        raise EmptyStreamError("no frames to convert")
    layout = layout or ChannelLayout()

    columns: list[np.ndarray] = []
    gap_events = 0
    gap_samples = 0
    prev: Frame | None = None
    for frame in frames:
        accel = np.stack([cal.accel(frame.samples[:, ax], ax) for ax in range(3)], axis=1)
        if prev is not None:
            missing = (frame.seq - prev_seq - 1) % 0x10000
            if missing > MAX_GAP_FRAMES:
                raise GapTooLargeError(
                    f"{missing} consecutive frames missing after seq {prev_seq}"
                )
            if missing:
                gap_events += 1
                gap_samples += missing
                for k in range(1, missing + 1):
                    steps = missing + 1
                    columns.append(prev * ((steps - k) / steps) + accel * (k / steps))
        columns.append(accel)
        prev, prev_seq = accel, frame.seq
    data = np.stack(columns, axis=2)  # (sensors, axes, samples)

    meta = {
        "gap_events": gap_events,
        "gap_samples": gap_samples,
        "calibration": cal.as_dict(),
    }
    return Recording(channels=data, sample_rate=sample_rate, layout=layout, meta=meta)


# --- .htrec container ---------------------------------------------------------

def _header_dict(rec: Recording, body: str) -> dict:
    meta = dict(rec.meta)
    calibration = meta.pop("calibration", None)
    return {
        "body": body,
        "sample_rate": rec.sample_rate,
        "channels": rec.n_channels,
        "samples": rec.n_samples,
        "positions": list(rec.layout.positions),
        "labels": list(rec.layout.labels) if rec.layout.labels else None,
        "calibration": calibration,
        "meta": meta,
    }


def _csv_columns(n_channels: int) -> list[str]:
    cols = ["time_s"]
    for ch in range(n_channels):
        cols += [f"ch{ch}_{ax}" for ax in AXIS_NAMES]
    return cols


def write_recording_file(rec: Recording, path, body: str = "csv") -> None:
    """Write a recording to an ``.htrec`` container (CSV or binary body)."""
    if body not in ("csv", "binary"):
        raise ValueError("body must be 'csv' or 'binary'")
    header = json.dumps(_header_dict(rec, body))
    flat = rec.channels.reshape(rec.n_channels * 3, rec.n_samples).T  # (samples, 18)
    with open(path, "wb") as fh:
        fh.write(f"{_MAGIC}{_VERSION}\n".encode())
        fh.write(header.encode())
        fh.write(b"\n")
        if body == "csv":
            text = io.StringIO()
            text.write(",".join(_csv_columns(rec.n_channels)) + "\n")
            for i in range(rec.n_samples):
                t = i / rec.sample_rate
                row = [repr(t)] + [repr(float(v)) for v in flat[i]]
                text.write(",".join(row) + "\n")
            fh.write(text.getvalue().encode())
        else:
            fh.write(np.ascontiguousarray(flat, dtype="<f8").tobytes())


def read_recording_file(path) -> Recording:
    """Read an ``.htrec`` container back into a recording (lossless)."""
    with open(path, "rb") as fh:
        magic = fh.readline()
        if not magic.startswith(_MAGIC.encode()):
            raise MalformedHeaderError("missing HTREC magic line")
        try:
            version = int(magic[len(_MAGIC):].strip())
        except ValueError:
            raise MalformedHeaderError("unparseable container version") from None
        if version != _VERSION:
            raise VersionUnsupportedError(f"container version {version} not supported")
        try:
            header = json.loads(fh.readline().decode())
            body = header["body"]
            sample_rate = float(header["sample_rate"])
            n_channels = int(header["channels"])
            n_samples = int(header["samples"])
            positions = tuple(header["positions"])
            labels = header.get("labels")
            meta = dict(header.get("meta", {}))
        except (json.JSONDecodeError, KeyError, TypeError, UnicodeDecodeError) as exc:
            raise MalformedHeaderError(f"bad header: {exc}") from None
        if header.get("calibration") is not None:
            meta["calibration"] = header["calibration"]

        n_cols = n_channels * 3
        if body == "csv":
            text = io.TextIOWrapper(fh, encoding="utf-8")
            names = text.readline()
            if not names.strip():
                raise TruncatedDataError("missing CSV column header")
            flat = np.empty((n_samples, n_cols))
            for i in range(n_samples):
                line = text.readline()
                if not line:
                    raise TruncatedDataError(
                        f"expected {n_samples} rows, file ends at row {i}"
                    )
                parts = line.rstrip("\n").split(",")
                if len(parts) != n_cols + 1:
                    raise TruncatedDataError(
                        f"row {i} has {len(parts) - 1} data columns, expected {n_cols}"
                    )
                flat[i] = [float(p) for p in parts[1:]]
            if text.readline():
                raise TruncatedDataError("file has more rows than the header declares")
        elif body == "binary":
            raw = fh.read(n_samples * n_cols * 8)
            if len(raw) != n_samples * n_cols * 8:
                raise TruncatedDataError(
                    f"binary body holds {len(raw)} bytes, expected {n_samples * n_cols * 8}"
                )
            if fh.read(1):
                raise TruncatedDataError("binary body longer than the header declares")
            flat = np.frombuffer(raw, dtype="<f8").reshape(n_samples, n_cols)
        else:
            raise MalformedHeaderError(f"unknown body kind {body!r}")

    channels = np.ascontiguousarray(flat.T.reshape(n_channels, 3, n_samples))
    layout = ChannelLayout(positions=positions, labels=tuple(labels) if labels else None)
    return Recording(channels=channels, sample_rate=sample_rate, layout=layout, meta=meta)
