"""Schedule arithmetic, slot ordering, anchors, and trigger quantization."""

import numpy as np
import pytest

from mmwsounder.beams import BeamId, Side, default_codebook
from mmwsounder.errors import GuardTimeError, ScheduleError
from mmwsounder.sweep import (
    TriggerModel,
    build_schedule,
    describe,
    schedule_from_sections,
    schedule_sections,
    snapshot_cadence,
)


def azimuth_beams(side):
    return [bid for bid, _ in default_codebook(side).azimuth_row()]


def full_sweep(repetitions):
    return build_schedule(
        azimuth_beams(Side.TX), azimuth_beams(Side.RX), repetitions
    )


def test_full_sweep_duration_exact():
    sched = full_sweep(10)
    assert len(sched.slots) == 19 * 19 * 10
    assert sched.total_duration == 0.01444


def test_single_repetition_duration_exact():
    sched = full_sweep(1)
    assert len(sched.slots) == 361
    assert sched.total_duration == 0.001444


def test_unit_schedule():
    tx = BeamId(9, 6, Side.TX)
    rx = BeamId(9, 6, Side.RX)
    sched = build_schedule([tx], [rx], 1)
    assert len(sched.slots) == 1
    assert sched.slots[0].start_time == 0.0
    assert sched.total_duration == 4e-6


def test_slot_ordering_rx_inner():
    # Repetition outermost, then TX, RX fastest.
    tx = azimuth_beams(Side.TX)[:3]
    rx = azimuth_beams(Side.RX)[:2]
    sched = build_schedule(tx, rx, 2)
    seq = [(s.repetition_index, s.tx_beam.azimuth_index, s.rx_beam.azimuth_index)
           for s in sched.slots]
    assert seq == [
        (0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 1), (0, 2, 0), (0, 2, 1),
        (1, 0, 0), (1, 0, 1), (1, 1, 0), (1, 1, 1), (1, 2, 0), (1, 2, 1),
    ]


def test_slot_times_monotone_on_grid():
    sched = full_sweep(2)
    times = sched.slot_times
    assert np.all(np.diff(times) > 0)
    edges = times * sched.trigger.ref_clock
    assert np.allclose(edges, np.round(edges), atol=1e-9)
    assert sched.slot_period == 4e-6


def test_start_time_recomputable_from_index():
    sched = full_sweep(3)
    ref = sched.trigger.ref_clock
    for s in sched.slots[::97]:
        assert s.start_time == (s.index * sched.slot_period_edges) / ref
        assert s.start_edge == s.index * sched.slot_period_edges


def test_pair_coverage_counts():
    tx = azimuth_beams(Side.TX)[:4]
    rx = azimuth_beams(Side.RX)[:3]
    reps = 5
    sched = build_schedule(tx, rx, reps)
    counts = {}
    for s in sched.slots:
        key = (s.tx_beam.azimuth_index, s.rx_beam.azimuth_index)
        counts[key] = counts.get(key, 0) + 1
    assert all(c == reps for c in counts.values())
    assert len(counts) == 12


def test_natural_anchors_once_per_repetition():
    sched = full_sweep(10)
    assert len(sched.anchor_slots) == 10
    assert list(sched.anchor_slots) == [361 * r for r in range(10)]
    for i in sched.anchor_slots:
        s = sched.slots[i]
        assert s.anchor
        assert s.tx_beam == sched.tx_beams[0]
        assert s.rx_beam == sched.rx_beams[0]


def test_insert_policy_adds_reference_slots():
    tx = azimuth_beams(Side.TX)
    rx = azimuth_beams(Side.RX)
    sched = build_schedule(tx, rx, 1, anchor_policy="insert:50")
    # 361 payload slots plus an inserted reference every 50.
    inserted = [s for s in sched.slots if s.repetition_index == -1]
    assert len(sched.slots) == 361 + len(inserted)
    assert len(inserted) >= 7
    for s in inserted:
        assert s.anchor
        assert s.tx_beam == tx[0] and s.rx_beam == rx[0]
    anchor_idx = np.array(sched.anchor_slots)
    assert np.all(np.diff(anchor_idx) <= 51)
    # Payload coverage is unchanged by insertion.
    payload = [s for s in sched.slots if s.repetition_index >= 0]
    assert len(payload) == 361


def test_none_policy_has_no_anchors():
    sched = build_schedule(
        azimuth_beams(Side.TX), azimuth_beams(Side.RX), 2, anchor_policy="none"
    )
    assert sched.anchor_slots == ()
    assert not any(s.anchor for s in sched.slots)


def test_guard_time_floor():
    tx = azimuth_beams(Side.TX)[:1]
    rx = azimuth_beams(Side.RX)[:1]
    with pytest.raises(GuardTimeError):
        build_schedule(tx, rx, 1, guard_time=1.9e-6)
    with pytest.raises(ScheduleError):
        build_schedule([], rx, 1)
    with pytest.raises(ScheduleError):
        build_schedule(tx, rx, 0)
    with pytest.raises(ScheduleError):
        build_schedule(tx, rx, 1, anchor_policy="sometimes")


def test_snapshot_cadence_arithmetic():
    sched = full_sweep(10)
    starts = snapshot_cadence(sched, 0.1, count=5)
    assert np.array_equal(starts, [0.0, 0.1, 0.2, 0.3, 0.4])


def test_snapshot_cadence_back_to_back():
    sched = full_sweep(1)
    starts = snapshot_cadence(sched, sched.total_duration, count=3)
    assert starts[1] == sched.total_duration
    with pytest.raises(ScheduleError):
        snapshot_cadence(sched, sched.total_duration * 0.99, count=2)


def test_snapshot_cadence_grid_quantization():
    sched = full_sweep(1)
    # An off-grid interval is stretched to the next 100 ns edge.
    starts = snapshot_cadence(sched, 1.44412345e-3, count=4)
    edges = starts * 1e7
    assert np.allclose(edges, np.round(edges), atol=1e-9)
    assert starts[1] >= 1.44412345e-3


def test_trigger_pps_offset_shifts_cadence():
    sched = build_schedule(
        azimuth_beams(Side.TX)[:2],
        azimuth_beams(Side.RX)[:2],
        1,
        trigger=TriggerModel(pps_offset=2.6e-7),
    )
    starts = snapshot_cadence(sched, 1e-3, count=2)
    # Offset lands on the nearest counter edge.
    assert starts[0] == pytest.approx(3e-7, abs=1e-12)


def test_describe_mentions_key_numbers():
    sched = full_sweep(10)
    text = describe(sched)
    assert "3610" in text
    assert "14.44" in text
    assert "4.000 us" in text


def test_sections_roundtrip():
    sched = build_schedule(
        azimuth_beams(Side.TX)[:5],
        azimuth_beams(Side.RX)[:3],
        4,
        anchor_policy="insert:7",
    )
    flat = {
        name: dict(kv.items()) for name, kv in schedule_sections(sched).items()
    }
    back = schedule_from_sections(flat)
    assert back.total_duration == sched.total_duration
    assert back.anchor_slots == sched.anchor_slots
    assert len(back.slots) == len(sched.slots)
    for a, b in zip(back.slots, sched.slots):
        assert a.start_time == b.start_time
        assert a.tx_beam == b.tx_beam and a.rx_beam == b.rx_beam
