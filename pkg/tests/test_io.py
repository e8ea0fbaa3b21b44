"""Container format: round trips, byte determinism, integrity errors,
stride arithmetic, and the raw int16 sidecar."""

import dataclasses
import math
import struct
import zlib

import numpy as np
import pytest

from mmwsounder.beams import Side, default_codebook
from mmwsounder.capture import CaptureSet, simulate_calibration, simulate_capture
from mmwsounder.channel import los_channel, planted_nlos_channel, random_scene
from mmwsounder.errors import (
    BadMagicError,
    ConfigError,
    CrcMismatchError,
    FormatError,
    TruncationError,
    UnsupportedVersionError,
)
from mmwsounder.impairments import ClockMode, ClockModel, RxFrontEnd, shared_clock
from mmwsounder.io import (
    container_bytes,
    container_from_bytes,
    read_capture,
    read_raw_sidecar,
    write_capture,
    write_raw_sidecar,
)
from mmwsounder.processing import directional_pdp
from mmwsounder.sweep import build_schedule

BYPASS = RxFrontEnd(noise_figure=-math.inf, adc_bits=None)
SHARED = (shared_clock(), shared_clock())

TX_CB = default_codebook(Side.TX)
RX_CB = default_codebook(Side.RX)
TX_AZ = [b for b, _ in TX_CB.azimuth_row()]
RX_AZ = [b for b, _ in RX_CB.azimuth_row()]


def small_capture(seed=0, **kw):
    sched = build_schedule(TX_AZ[:3], RX_AZ[:3], 2, anchor_policy="insert:4")
    clocks = (shared_clock(), ClockModel(ClockMode.FREE_RUNNING, seed=seed))
    fe = RxFrontEnd()
    return simulate_capture(
        los_channel(75.0), sched, (TX_CB, RX_CB), clocks, fe, seed=seed, **kw
    )


def test_field_capture_round_trip(tmp_path):
    cap = small_capture(snapshot_start=0.25)
    path = str(tmp_path / "cap.mmws")
    write_capture(cap, path)
    back = read_capture(path)
    assert back == cap
    assert back.records[5].start_time == cap.records[5].start_time
    assert back.metadata is not cap.metadata


def test_calibration_round_trips(tmp_path):
    for mode in ("shared", "per_pair"):
        cal = simulate_calibration((TX_CB, RX_CB), RxFrontEnd(ripple_seed=7), mode=mode)
        path = str(tmp_path / f"cal_{mode}.mmws")
        write_capture(cal, path)
        assert read_capture(path) == cal


def test_serialization_is_byte_deterministic(tmp_path):
    cap = small_capture()
    blob = container_bytes(cap)
    assert container_bytes(cap) == blob
    # a read-back set serializes to the identical bytes
    assert container_bytes(container_from_bytes(blob)) == blob


def test_empty_records_is_a_valid_container():
    cap = small_capture()
    empty = CaptureSet(cap.metadata, ())
    back = container_from_bytes(container_bytes(empty))
    assert back.records == ()
    assert back.metadata == cap.metadata


def test_unknown_metadata_preserved_verbatim():
    cap = small_capture()
    meta = {name: dict(sec) for name, sec in cap.metadata.items()}
    meta["future_extension"] = {"Mixed_Case_Key": "kept as-is", "x": ""}
    tagged = CaptureSet(meta, cap.records)
    back = container_from_bytes(container_bytes(tagged))
    assert back.metadata["future_extension"] == {
        "Mixed_Case_Key": "kept as-is",
        "x": "",
    }
    assert back == tagged


def test_single_byte_corruption_fails_crc(tmp_path):
    cap = small_capture()
    blob = bytearray(container_bytes(cap))
    rng = np.random.default_rng(0)
    for offset in rng.integers(4, len(blob), size=25):
        corrupted = bytearray(blob)
        corrupted[offset] ^= 0x40
        with pytest.raises(CrcMismatchError, match="offset"):
            container_from_bytes(bytes(corrupted))


def test_magic_and_version_errors():
    cap = small_capture()
    blob = bytearray(container_bytes(cap))

    wrong_magic = bytearray(blob)
    wrong_magic[0] ^= 0xFF
    with pytest.raises(BadMagicError):
        container_from_bytes(bytes(wrong_magic))

    # a well-formed file from a future writer: version 99, valid CRC
    future = bytearray(blob[:-4])
    struct.pack_into("<H", future, 4, 99)
    future += struct.pack("<I", zlib.crc32(bytes(future)))
    with pytest.raises(UnsupportedVersionError, match="99"):
        container_from_bytes(bytes(future))


def test_truncation_errors():
    cap = small_capture()
    blob = container_bytes(cap)
    with pytest.raises(TruncationError):
        container_from_bytes(blob[:3])
    with pytest.raises(TruncationError):
        container_from_bytes(blob[:12])
    # CRC-consistent but with a bite taken out of the record section
    short = blob[:-4 - 100]
    short += struct.pack("<I", zlib.crc32(short))
    with pytest.raises(TruncationError):
        container_from_bytes(short)


def test_record_slot_outside_schedule_rejected():
    cap = small_capture()
    rogue = dataclasses.replace(cap.records[0], slot_index=9999)
    bad = CaptureSet(cap.metadata, (rogue,) + cap.records[1:])
    blob = container_bytes(bad)
    with pytest.raises(FormatError, match="9999"):
        container_from_bytes(blob)


def test_unrepresentable_records_rejected_on_write():
    cap = small_capture()
    off_grid = dataclasses.replace(cap.records[0], agc_gain=1.2345678)
    with pytest.raises(ConfigError, match="centi"):
        container_bytes(CaptureSet(cap.metadata, (off_grid,)))
    short_h = dataclasses.replace(
        cap.records[0], h_measured=cap.records[0].h_measured[:100]
    )
    with pytest.raises(ConfigError, match="tones"):
        container_bytes(CaptureSet(cap.metadata, (short_h,)))


def test_default_snapshot_file_size(tmp_path):
    # stride oracle: 16-byte header + 801 tones * 16 bytes, 3610 slots
    stride = 16 + 801 * 16
    record_section = 3610 * stride
    assert record_section == 46_323_520

    sched = build_schedule(TX_AZ, RX_AZ, 10)
    cap = simulate_capture(
        los_channel(100.0), sched, (TX_CB, RX_CB), SHARED, BYPASS
    )
    path = str(tmp_path / "snap.mmws")
    write_capture(cap, path)
    size = (tmp_path / "snap.mmws").stat().st_size
    meta_len = len(container_bytes(CaptureSet(cap.metadata, ())) ) - 22
    assert size == 22 + meta_len + record_section
    assert abs(size - 46.3e6) < 2e5


def test_processing_identical_after_round_trip(tmp_path):
    ch = planted_nlos_channel(
        [(100e-9, -95.0, 0.0, 10.0), (600e-9, -110.0, -20.0, 30.0)]
    )
    sched = build_schedule(TX_AZ, RX_AZ, 1)
    cap = simulate_capture(ch, sched, (TX_CB, RX_CB), SHARED, RxFrontEnd())
    cal = simulate_calibration((TX_CB, RX_CB), BYPASS)
    cap_path = str(tmp_path / "c.mmws")
    cal_path = str(tmp_path / "k.mmws")
    write_capture(cap, cap_path)
    write_capture(cal, cal_path)
    p_mem = directional_pdp(cap, cal).p
    p_file = directional_pdp(read_capture(cap_path), read_capture(cal_path)).p
    assert np.array_equal(p_mem, p_file)


def test_randomized_round_trip_property():
    rng = np.random.default_rng(42)
    policies = ("auto", "none", "insert:3")
    for trial in range(50):
        n_tx = int(rng.integers(1, 4))
        n_rx = int(rng.integers(1, 4))
        reps = int(rng.integers(1, 3))
        sched = build_schedule(
            TX_AZ[: n_tx], RX_AZ[: n_rx], reps,
            anchor_policy=str(rng.choice(policies)),
        )
        if rng.integers(2):
            fe = BYPASS
        else:
            fe = RxFrontEnd(adc_bits=int(rng.integers(8, 13)), ripple_seed=trial)
        clocks = (
            shared_clock(),
            ClockModel(ClockMode.FREE_RUNNING, seed=trial)
            if rng.integers(2)
            else shared_clock(),
        )
        if rng.integers(2):
            ch = los_channel(float(rng.uniform(5, 300)))
        else:
            ch = random_scene(int(rng.integers(1, 4)), seed=trial)
        cap = simulate_capture(
            ch, sched, (TX_CB, RX_CB), clocks, fe, seed=trial,
            averaging=int(rng.integers(1, 3)),
        )
        back = container_from_bytes(container_bytes(cap))
        assert back == cap, f"trial {trial} round trip mismatch"


def test_raw_sidecar_round_trip(tmp_path):
    cap = small_capture()
    path = str(tmp_path / "cap.raw")
    write_raw_sidecar(cap, path)
    back = read_raw_sidecar(path)
    assert len(back) == len(cap.records)
    for (codes, scale), rec in zip(back, cap.records):
        assert codes.dtype == np.int16
        assert codes.shape == (rec.h_measured.size, 2)
        expect = np.round(
            np.stack([rec.h_measured.real, rec.h_measured.imag], axis=1) / scale
        )
        assert np.array_equal(codes, expect)
        assert np.abs(codes).max() == 32767

    data = (tmp_path / "cap.raw").read_bytes()
    with pytest.raises(BadMagicError):
        read_raw_sidecar(_write(tmp_path, b"XXXX" + data[4:]))
    with pytest.raises(TruncationError):
        read_raw_sidecar(_write(tmp_path, data[:-7]))


def _write(tmp_path, data):
    p = tmp_path / "scratch.bin"
    p.write_bytes(data)
    return str(p)
