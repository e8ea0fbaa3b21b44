"""Bit-exact capture container and the raw-sample sidecar.

Layout of a capture file (all integers little-endian):

    offset 0    magic           4 bytes  b"MMWS"
           4    version         uint16
           6    metadata_len    uint32   (= L)
          10    metadata        L bytes, UTF-8 INI text
        10+L    record_count    uint32
        14+L    num_tones       uint32   (= N)
        18+L    records         record_count x (16 + N*16) bytes
         -4     crc32           uint32 over every preceding byte

Each record is a 16-byte header followed by N complex tones as
interleaved float64 I/Q:

    slot_index  uint32    agc_gain    int16 (centi-dB)
    flags       uint16    tx_az,tx_el,rx_az,rx_el  uint8 each
    repetition  int16     2 bytes reserved (zero)

Records store tone-domain doubles, not the ADC's native integers:
quantization already happened upstream, and format fidelity to the
physical bit depth is served by the int16 sidecar instead.

Record start times are not stored; they are recomputed from the
schedule metadata (plus snapshot_start_s) with the same expression the
simulator used, so the round trip is bit-exact. Calibration records sit
at t = 0 by definition.

The reader validates in a fixed order: magic, CRC, version, then
structure. The CRC runs before anything length-prefixed is trusted, so
a single flipped byte anywhere after the magic surfaces as a CRC
mismatch rather than as a confusing downstream parse error.
"""

from __future__ import annotations

import configparser
import io as _stringio
import os
import struct
import tempfile
import zlib

import numpy as np

from .capture import CaptureRecord, CaptureSet, FLAG_ANCHOR, FLAG_CLIPPED
from .errors import (
    BadMagicError,
    ConfigError,
    CrcMismatchError,
    FormatError,
    TruncationError,
    UnsupportedVersionError,
)

MAGIC = b"MMWS"
RAW_MAGIC = b"MMWR"
CONTAINER_VERSION = 1
HEADER_STRUCT = struct.Struct("<IhHBBBBhxx")
assert HEADER_STRUCT.size == 16

# smallest parseable file: magic + version + empty metadata + zero
# records + crc
_MIN_FILE = 4 + 2 + 4 + 4 + 4 + 4


def _new_parser() -> configparser.ConfigParser:
    cp = configparser.ConfigParser(interpolation=None, delimiters=("=",))
    cp.optionxform = str
    return cp


def metadata_to_text(metadata: dict[str, dict[str, str]]) -> str:
    cp = _new_parser()
    for section, kv in metadata.items():
        cp.add_section(section)
        for key, value in kv.items():
            cp.set(section, key, str(value))
    buf = _stringio.StringIO()
    cp.write(buf)
    return buf.getvalue()


def metadata_from_text(text: str) -> dict[str, dict[str, str]]:
    cp = _new_parser()
    try:
        cp.read_string(text)
    except configparser.Error as exc:
        raise FormatError(f"metadata block is not parseable: {exc}") from exc
    return {section: dict(cp.items(section)) for section in cp.sections()}


def _agc_centi(record: CaptureRecord) -> int:
    c = round(record.agc_gain * 100.0)
    if abs(record.agc_gain * 100.0 - c) > 1e-6:
        raise ConfigError(
            f"agc_gain {record.agc_gain} is not on the centi-dB grid"
        )
    if not -32768 <= c <= 32767:
        raise ConfigError(f"agc_gain {record.agc_gain} dB overflows int16 centi-dB")
    return int(c)


def _record_bytes(record: CaptureRecord, num_tones: int) -> bytes:
    h = np.asarray(record.h_measured)
    if h.shape != (num_tones,):
        raise ConfigError(
            f"record {record.slot_index} has {h.shape} tones, metadata says {num_tones}"
        )
    if not 0 <= record.slot_index <= 0xFFFFFFFF:
        raise ConfigError(f"slot index {record.slot_index} overflows uint32")
    if not -32768 <= record.repetition_index <= 32767:
        raise ConfigError(
            f"repetition index {record.repetition_index} overflows int16"
        )
    header = HEADER_STRUCT.pack(
        record.slot_index,
        _agc_centi(record),
        record.flags,
        record.tx_beam.azimuth_index,
        record.tx_beam.elevation_index,
        record.rx_beam.azimuth_index,
        record.rx_beam.elevation_index,
        record.repetition_index,
    )
    return header + np.ascontiguousarray(h, dtype="<c16").tobytes()


def container_bytes(cap: CaptureSet) -> bytes:
    """Serialize without touching the filesystem; byte-deterministic."""
    try:
        num_tones = int(cap.metadata["tone_plan"]["num_tones"])
    except KeyError as exc:
        raise ConfigError("capture metadata lacks a tone plan") from exc
    meta = metadata_to_text(cap.metadata).encode("utf-8")
    parts = [
        MAGIC,
        struct.pack("<H", CONTAINER_VERSION),
        struct.pack("<I", len(meta)),
        meta,
        struct.pack("<II", len(cap.records), num_tones),
    ]
    parts.extend(_record_bytes(r, num_tones) for r in cap.records)
    body = b"".join(parts)
    return body + struct.pack("<I", zlib.crc32(body))


def _atomic_write(path: str, data: bytes) -> None:
    directory = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=directory, prefix=".mmws-")
    try:
        with os.fdopen(fd, "wb") as f:
            f.write(data)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def write_capture(cap: CaptureSet, path: str) -> None:
    """Write one capture or calibration container, atomically."""
    _atomic_write(path, container_bytes(cap))


def _start_times(metadata: dict[str, dict[str, str]]):
    """Closure slot_index -> start time, re-deriving what the simulator
    wrote. Captures without a schedule section (calibrations) are all
    at t = 0."""
    if "schedule" not in metadata:
        return lambda slot_index: 0.0
    from .sweep import schedule_from_sections

    sched = schedule_from_sections(metadata)
    snapshot_start = float(
        metadata.get("capture", {}).get("snapshot_start_s", "0")
    )

    def lookup(slot_index: int) -> float:
        if slot_index >= len(sched.slots):
            raise FormatError(
                f"record slot index {slot_index} outside the "
                f"{len(sched.slots)}-slot schedule"
            )
        return snapshot_start + sched.slots[slot_index].start_time

    return lookup


def read_capture(path: str) -> CaptureSet:
    """Read and fully validate a capture container."""
    with open(path, "rb") as f:
        data = f.read()
    return container_from_bytes(data)


def container_from_bytes(data: bytes) -> CaptureSet:
    if len(data) < 4:
        raise TruncationError(f"file is {len(data)} bytes, shorter than the magic")
    if data[:4] != MAGIC:
        raise BadMagicError(f"expected magic {MAGIC!r}, found {data[:4]!r}")
    if len(data) < _MIN_FILE:
        raise TruncationError(
            f"file is {len(data)} bytes, below the {_MIN_FILE}-byte minimum"
        )
    stored_crc = struct.unpack_from("<I", data, len(data) - 4)[0]
    actual_crc = zlib.crc32(data[:-4])
    if stored_crc != actual_crc:
        raise CrcMismatchError(
            f"crc32 stored at offset {len(data) - 4} is {stored_crc:#010x}, "
            f"contents hash to {actual_crc:#010x}"
        )
    version = struct.unpack_from("<H", data, 4)[0]
    if version != CONTAINER_VERSION:
        raise UnsupportedVersionError(
            f"container version {version}, this reader understands "
            f"{CONTAINER_VERSION}"
        )
    meta_len = struct.unpack_from("<I", data, 6)[0]
    pos = 10
    if pos + meta_len + 8 > len(data) - 4:
        raise TruncationError(
            f"metadata block of {meta_len} bytes does not fit the file"
        )
    metadata = metadata_from_text(data[pos : pos + meta_len].decode("utf-8"))
    pos += meta_len
    count, num_tones = struct.unpack_from("<II", data, pos)
    pos += 8
    stride = HEADER_STRUCT.size + num_tones * 16
    if pos + count * stride != len(data) - 4:
        raise TruncationError(
            f"{count} records of {stride} bytes do not fit the "
            f"{len(data) - 4 - pos} record-section bytes"
        )

    from .beams import BeamId, Side

    start_time_of = _start_times(metadata)
    records = []
    for _ in range(count):
        (
            slot_index,
            agc_centi,
            flags,
            tx_az,
            tx_el,
            rx_az,
            rx_el,
            repetition,
        ) = HEADER_STRUCT.unpack_from(data, pos)
        pos += HEADER_STRUCT.size
        h = np.frombuffer(data, dtype="<c16", count=num_tones, offset=pos).copy()
        pos += num_tones * 16
        records.append(
            CaptureRecord(
                slot_index,
                BeamId(tx_az, tx_el, Side.TX),
                BeamId(rx_az, rx_el, Side.RX),
                repetition,
                start_time_of(slot_index),
                h,
                agc_centi / 100.0,
                bool(flags & FLAG_CLIPPED),
                bool(flags & FLAG_ANCHOR),
            )
        )
    return CaptureSet(metadata, tuple(records))


def write_raw_sidecar(cap: CaptureSet, path: str) -> None:
    """16-bit integer I/Q sidecar, one scale per record.

    Exists solely so the native-bit-depth format path stays exercised;
    analysis always runs on the double-precision container.
    """
    parts = [RAW_MAGIC, struct.pack("<HI", CONTAINER_VERSION, len(cap.records))]
    for r in cap.records:
        h = np.asarray(r.h_measured)
        iq = np.empty((h.size, 2))
        iq[:, 0] = h.real
        iq[:, 1] = h.imag
        peak = np.abs(iq).max()
        scale = peak / 32767.0 if peak > 0 else 1.0
        codes = np.round(iq / scale).astype("<i2")
        parts.append(struct.pack("<Id", h.size, scale))
        parts.append(codes.tobytes())
    _atomic_write(path, b"".join(parts))


def read_raw_sidecar(path: str) -> list[tuple[np.ndarray, float]]:
    """Read the sidecar back as (int16 codes of shape (n, 2), scale)."""
    with open(path, "rb") as f:
        data = f.read()
    if data[:4] != RAW_MAGIC:
        raise BadMagicError(f"expected magic {RAW_MAGIC!r}, found {data[:4]!r}")
    version, count = struct.unpack_from("<HI", data, 4)
    if version != CONTAINER_VERSION:
        raise UnsupportedVersionError(f"sidecar version {version}")
    pos = 10
    out = []
    for _ in range(count):
        if pos + 12 > len(data):
            raise TruncationError("sidecar ends inside a record header")
        n, scale = struct.unpack_from("<Id", data, pos)
        pos += 12
        end = pos + n * 4
        if end > len(data):
            raise TruncationError("sidecar ends inside record samples")
        codes = np.frombuffer(data, dtype="<i2", count=n * 2, offset=pos)
        out.append((codes.reshape(n, 2).copy(), scale))
        pos = end
    if pos != len(data):
        raise TruncationError("sidecar has trailing bytes")
    return out
