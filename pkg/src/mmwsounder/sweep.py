"""Timed beam-switching schedules and the trigger chain that keeps every
slot of a MIMO snapshot on one phase-coherent time base.

All slot boundaries live on integer edges of the 10 MHz reference clock
(100 ns grid), and every slot of a snapshot references a single counter
start, which is what makes absolute delays comparable across beam pairs
without retriggering.

Slot ordering puts the repetition loop outermost (TX middle, RX inner), so
the first beam pair recurs once per full sweep pass. Those natural
recurrences are the default drift anchors: they cost no extra slots, which
keeps the Table-resolution totals (14.44 ms / 1.444 ms) exact. An
"insert:N" policy that splices a reference slot every N slots exists for
single-repetition sweeps, at the price of lengthening the snapshot.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .beams import BeamId
from .errors import GuardTimeError, ScheduleError

REF_CLOCK_HZ = 1e7
MIN_GUARD_TIME = 2e-6

DEFAULT_WAVEFORM_DURATION = 2e-6
DEFAULT_GUARD_TIME = 2e-6
DEFAULT_REPETITIONS = 10


@dataclass(frozen=True)
class TriggerModel:
    """PPS-aligned counter model; pps_offset is the per-side alignment
    error of the 1 PPS edge against true UTC."""

    ref_clock: float = REF_CLOCK_HZ
    pps_offset: float = 0.0
    counter_start: int = 0


@dataclass(frozen=True)
class Slot:
    index: int
    tx_beam: BeamId
    rx_beam: BeamId
    repetition_index: int
    start_edge: int
    start_time: float
    anchor: bool = False


@dataclass(frozen=True)
class SweepSchedule:
    slots: tuple[Slot, ...]
    tx_beams: tuple[BeamId, ...]
    rx_beams: tuple[BeamId, ...]
    waveform_duration: float
    guard_time: float
    repetitions: int
    anchor_slots: tuple[int, ...]
    anchor_policy: str
    slot_period_edges: int
    trigger: TriggerModel = TriggerModel()

    @property
    def slot_period(self) -> float:
        return self.slot_period_edges / self.trigger.ref_clock

    @property
    def total_duration(self) -> float:
        return len(self.slots) * self.slot_period_edges / self.trigger.ref_clock

    @property
    def slot_times(self) -> np.ndarray:
        return np.array([s.start_time for s in self.slots])

    @property
    def anchor_times(self) -> np.ndarray:
        return np.array([self.slots[i].start_time for i in self.anchor_slots])


def _period_edges(waveform_duration: float, guard_time: float, ref_clock: float) -> int:
    period = waveform_duration + guard_time
    edges = period * ref_clock
    rounded = round(edges)
    if abs(edges - rounded) < 1e-6:
        return int(rounded)
    # Off-grid periods stretch to the next clock edge.
    return int(math.ceil(edges))


def build_schedule(
    tx_beams,
    rx_beams,
    repetitions: int = DEFAULT_REPETITIONS,
    waveform_duration: float = DEFAULT_WAVEFORM_DURATION,
    guard_time: float = DEFAULT_GUARD_TIME,
    anchor_policy: str = "auto",
    trigger: TriggerModel | None = None,
) -> SweepSchedule:
    """One contiguous snapshot covering every TX x RX pair `repetitions`
    times.

    anchor_policy:
      "auto"      flag the natural recurrences of the first beam pair
                  (one per repetition pass); no slots are added.
      "none"      no anchors.
      "insert:N"  additionally splice a reference-pair slot every N slots
                  (repetition_index -1); lengthens the snapshot.
    """
    tx_beams = tuple(tx_beams)
    rx_beams = tuple(rx_beams)
    if not tx_beams or not rx_beams:
        raise ScheduleError("beam lists must be non-empty")
    if repetitions < 1:
        raise ScheduleError(f"repetitions must be >= 1, got {repetitions}")
    if waveform_duration <= 0:
        raise ScheduleError("waveform_duration must be > 0")
    if guard_time < MIN_GUARD_TIME:
        raise GuardTimeError(
            f"guard_time {guard_time} below the {MIN_GUARD_TIME} hardware "
            "switching floor"
        )
    trigger = trigger or TriggerModel()

    insert_every = 0
    if anchor_policy.startswith("insert:"):
        insert_every = int(anchor_policy.split(":", 1)[1])
        if insert_every < 1:
            raise ScheduleError(f"bad anchor policy: {anchor_policy}")
    elif anchor_policy not in ("auto", "none"):
        raise ScheduleError(f"unknown anchor policy: {anchor_policy}")

    edges = _period_edges(waveform_duration, guard_time, trigger.ref_clock)
    ref_pair = (tx_beams[0], rx_beams[0])
    slots: list[Slot] = []
    anchors: list[int] = []

    def emit(tx, rx, rep, anchor):
        idx = len(slots)
        start_edge = idx * edges
        slots.append(
            Slot(idx, tx, rx, rep, start_edge, start_edge / trigger.ref_clock, anchor)
        )
        if anchor:
            anchors.append(idx)

    for rep in range(repetitions):
        for tx in tx_beams:
            for rx in rx_beams:
                if insert_every and slots and len(slots) % insert_every == 0:
                    emit(*ref_pair, -1, True)
                natural = (
                    anchor_policy != "none" and (tx, rx) == ref_pair
                )
                emit(tx, rx, rep, natural)

    return SweepSchedule(
        tuple(slots),
        tx_beams,
        rx_beams,
        waveform_duration,
        guard_time,
        repetitions,
        tuple(anchors),
        anchor_policy,
        edges,
        trigger,
    )


def snapshot_cadence(
    schedule: SweepSchedule, repeat_interval: float, count: int = 10
) -> np.ndarray:
    """Counter-quantized start times for a train of repeated snapshots."""
    if count < 1:
        raise ScheduleError("count must be >= 1")
    if repeat_interval < schedule.total_duration:
        raise ScheduleError(
            f"repeat interval {repeat_interval} shorter than snapshot "
            f"duration {schedule.total_duration}"
        )
    ref = schedule.trigger.ref_clock
    interval_edges = _period_edges(repeat_interval, 0.0, ref)
    offset_edges = round(schedule.trigger.pps_offset * ref)
    return (offset_edges + interval_edges * np.arange(count)) / ref


def describe(schedule: SweepSchedule, max_rows: int = 8) -> str:
    """Human-readable schedule dump for the CLI."""
    lines = [
        f"slots:          {len(schedule.slots)}",
        f"tx beams:       {len(schedule.tx_beams)}",
        f"rx beams:       {len(schedule.rx_beams)}",
        f"repetitions:    {schedule.repetitions}",
        f"slot period:    {schedule.slot_period * 1e6:.3f} us "
        f"({schedule.slot_period_edges} clock edges)",
        f"total duration: {schedule.total_duration * 1e3:.6f} ms",
        f"anchor policy:  {schedule.anchor_policy} "
        f"({len(schedule.anchor_slots)} anchors)",
        "",
        "index  time_us    tx(az,el)  rx(az,el)  rep  anchor",
    ]
    shown = list(schedule.slots[:max_rows])
    for s in shown:
        lines.append(
            f"{s.index:5d}  {s.start_time * 1e6:9.3f}  "
            f"({s.tx_beam.steering_azimuth:+.0f},{s.tx_beam.steering_elevation:+.0f})  "
            f"({s.rx_beam.steering_azimuth:+.0f},{s.rx_beam.steering_elevation:+.0f})  "
            f"{s.repetition_index:3d}  {'*' if s.anchor else ''}"
        )
    if len(schedule.slots) > max_rows:
        lines.append(f"... {len(schedule.slots) - max_rows} more slots")
    return "\n".join(lines)


def schedule_sections(schedule: SweepSchedule) -> dict[str, dict[str, str]]:
    """Schedule as INI sections; slots are recomputable, so only the
    generating parameters are stored."""
    sec = {
        "repetitions": str(schedule.repetitions),
        "waveform_duration_s": f"{schedule.waveform_duration:.17g}",
        "guard_time_s": f"{schedule.guard_time:.17g}",
        "anchor_policy": schedule.anchor_policy,
        "slot_period_edges": str(schedule.slot_period_edges),
        "ref_clock_hz": f"{schedule.trigger.ref_clock:.17g}",
        "pps_offset_s": f"{schedule.trigger.pps_offset:.17g}",
        "counter_start": str(schedule.trigger.counter_start),
        "loop_order": "repetition,tx,rx",
        "tx_beams": ";".join(
            f"{b.azimuth_index},{b.elevation_index}" for b in schedule.tx_beams
        ),
        "rx_beams": ";".join(
            f"{b.azimuth_index},{b.elevation_index}" for b in schedule.rx_beams
        ),
    }
    return {"schedule": sec}


def schedule_from_sections(sections) -> SweepSchedule:
    from .beams import Side

    sec = sections["schedule"]

    def parse_beams(key, side):
        return tuple(
            BeamId(int(a), int(e), side)
            for a, e in (pair.split(",") for pair in sec[key].split(";"))
        )

    trigger = TriggerModel(
        float(sec["ref_clock_hz"]),
        float(sec["pps_offset_s"]),
        int(sec["counter_start"]),
    )
    return build_schedule(
        parse_beams("tx_beams", Side.TX),
        parse_beams("rx_beams", Side.RX),
        int(sec["repetitions"]),
        float(sec["waveform_duration_s"]),
        float(sec["guard_time_s"]),
        sec["anchor_policy"],
        trigger,
    )
