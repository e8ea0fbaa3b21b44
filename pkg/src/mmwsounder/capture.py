"""Run a sweep schedule against a channel and collect per-slot records.

A capture is the tone-domain equivalent of the digitizer output: one
complex frequency response per slot (801 tones by default), plus the AGC
gain and flags the receiver would have logged. One 2 us waveform period
is one DFT frame, so nothing is lost relative to raw samples; a capture
of the default snapshot is ~5.8 M complex values instead of gigabytes.

Records hold the unitless propagation transfer function (channel times
both beam gains), with the AGC gain already unwound. Absolute power
matters only inside the front end (AGC decisions, noise, clipping);
tx_power_dbm sets it. 37 dBm at the PA plus the ~20 dBi array makes the
57 dBm EIRP of the link budget.

Metadata is a nested dict of INI sections assembled from every
component's own serializer, and is complete enough to re-simulate the
capture bit-for-bit.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .beams import BeamCodebook, BeamId, Side
from .channel import ChannelRealization, beam_pair_response, channel_sections, channel_from_sections
from .errors import ConfigError
from .impairments import (
    ClockModel,
    RxFrontEnd,
    apply_front_end,
    clock_from_sections,
    clock_sections,
    drift_phase,
    front_end_from_sections,
    front_end_sections,
    ripple_response,
)
from .sweep import SweepSchedule, schedule_from_sections, schedule_sections
from .waveform import TonePlan, default_plan, plan_from_sections, plan_sections

FORMAT_VERSION = 1

DEFAULT_TX_POWER_DBM = 37.0

# Anything below this is "no signal": a dead channel yields a dead
# record rather than synthetic noise.
_SILENCE_DBM = -300.0

FLAG_CLIPPED = 0x1
FLAG_ANCHOR = 0x2


@dataclass(frozen=True, eq=False)
class CaptureRecord:
    slot_index: int
    tx_beam: BeamId
    rx_beam: BeamId
    repetition_index: int
    start_time: float
    h_measured: np.ndarray
    agc_gain: float
    clipped: bool = False
    anchor: bool = False

    @property
    def flags(self) -> int:
        return (FLAG_CLIPPED if self.clipped else 0) | (
            FLAG_ANCHOR if self.anchor else 0
        )

    def __eq__(self, other):
        if not isinstance(other, CaptureRecord):
            return NotImplemented
        return (
            self.slot_index == other.slot_index
            and self.tx_beam == other.tx_beam
            and self.rx_beam == other.rx_beam
            and self.repetition_index == other.repetition_index
            and self.start_time == other.start_time
            and self.agc_gain == other.agc_gain
            and self.clipped == other.clipped
            and self.anchor == other.anchor
            and np.array_equal(self.h_measured, other.h_measured)
        )


@dataclass(frozen=True, eq=False)
class CaptureSet:
    """Self-contained capture: metadata sections plus slot records."""

    metadata: dict[str, dict[str, str]]
    records: tuple[CaptureRecord, ...] = field(default_factory=tuple)

    def __eq__(self, other):
        if not isinstance(other, CaptureSet):
            return NotImplemented
        return self.metadata == other.metadata and self.records == other.records

    @property
    def kind(self) -> str:
        return self.metadata["capture"]["kind"]

    @property
    def rx_orientation(self) -> float:
        return float(self.metadata["capture"]["rx_orientation_deg"])

    @property
    def seed(self) -> int:
        return int(self.metadata["capture"]["seed"])

    @property
    def num_tones(self) -> int:
        return int(self.metadata["tone_plan"]["num_tones"])

    def tone_plan(self) -> TonePlan:
        return plan_from_sections(self.metadata)

    def schedule(self) -> SweepSchedule | None:
        if "schedule" not in self.metadata:
            return None
        return schedule_from_sections(self.metadata)

    def front_end(self) -> RxFrontEnd:
        return front_end_from_sections(self.metadata)

    def clocks(self) -> tuple[ClockModel, ClockModel]:
        return (
            clock_from_sections(self.metadata, "tx"),
            clock_from_sections(self.metadata, "rx"),
        )

    def channel(self) -> ChannelRealization | None:
        if "channel" not in self.metadata:
            return None
        return channel_from_sections(self.metadata)

    def codebooks(self) -> tuple[BeamCodebook, BeamCodebook]:
        from .beams import codebook_from_sections

        return (
            codebook_from_sections(self.metadata, "codebook_tx"),
            codebook_from_sections(self.metadata, "codebook_rx"),
        )


def _slot_seed(root: int, slot_index: int) -> np.random.SeedSequence:
    return np.random.SeedSequence(entropy=(root, slot_index))


def _check_pair(codebooks) -> tuple[BeamCodebook, BeamCodebook]:
    tx_cb, rx_cb = codebooks
    if tx_cb.side is not Side.TX or rx_cb.side is not Side.RX:
        raise ConfigError("codebooks must be passed as (TX, RX)")
    return tx_cb, rx_cb


def simulate_capture(
    ch: ChannelRealization,
    sched: SweepSchedule,
    codebooks,
    clocks,
    fe: RxFrontEnd,
    rx_orientation: float = 0.0,
    seed: int = 0,
    averaging: int = 1,
    tx_power_dbm: float = DEFAULT_TX_POWER_DBM,
    plan: TonePlan | None = None,
    snapshot_start: float = 0.0,
    geo: tuple[float, float] | None = None,
) -> CaptureSet:
    """Simulate one MIMO snapshot.

    Per slot: channel response for the slot's beam pair, times the
    front-end ripple, times the TX/RX clock phase difference at the slot
    start, pushed through AGC/noise/ADC. Deterministic in (seed); slot
    noise draws are independent of slot count or ordering.
    """
    plan = plan or default_plan()
    tx_cb, rx_cb = _check_pair(codebooks)
    tx_clock, rx_clock = clocks
    if rx_cb.orientation not in (0.0, rx_orientation):
        raise ConfigError(
            f"RX codebook orientation {rx_cb.orientation} contradicts "
            f"rx_orientation {rx_orientation}"
        )
    if plan.period != sched.waveform_duration:
        raise ConfigError(
            f"tone plan period {plan.period} does not match schedule "
            f"waveform_duration {sched.waveform_duration}"
        )
    if averaging < 1:
        raise ConfigError("averaging must be >= 1")

    tx_pats = {bid: pat for bid, pat in tx_cb.patterns}
    rx_pats = {bid: pat for bid, pat in rx_cb.patterns}
    ripple = ripple_response(fe, plan.frequencies)
    per_tone_dbm = tx_power_dbm - 10 * math.log10(plan.num_tones)
    static = all(m.doppler_phase_rate == 0.0 for m in ch.mpcs)
    pair_cache: dict[tuple[BeamId, BeamId], np.ndarray] = {}

    records = []
    for slot in sched.slots:
        t = snapshot_start + slot.start_time
        key = (slot.tx_beam, slot.rx_beam)
        h_ideal = pair_cache.get(key) if static else None
        if h_ideal is None:
            h_ideal = beam_pair_response(
                ch, tx_pats[slot.tx_beam], rx_pats[slot.rx_beam],
                rx_orientation, plan, t,
            )
            if static:
                pair_cache[key] = h_ideal
        phasor = np.exp(
            1j * (drift_phase(tx_clock, t) - drift_phase(rx_clock, t))
        )
        raw = h_ideal * ripple * phasor
        total = float(np.sum(np.abs(raw) ** 2))
        if total == 0.0:
            records.append(
                CaptureRecord(
                    slot.index, slot.tx_beam, slot.rx_beam,
                    slot.repetition_index, t, raw, fe.agc_gain_range[1],
                    False, slot.anchor,
                )
            )
            continue
        rx_power = per_tone_dbm + 10 * math.log10(total)
        res = apply_front_end(
            raw, fe, rx_power, averaging,
            _slot_seed(seed, slot.index), plan.tone_spacing,
        )
        records.append(
            CaptureRecord(
                slot.index, slot.tx_beam, slot.rx_beam,
                slot.repetition_index, t, res.h, res.agc_gain,
                res.clipped, slot.anchor,
            )
        )

    metadata: dict[str, dict[str, str]] = {
        "capture": {
            "format_version": str(FORMAT_VERSION),
            "kind": "field",
            "rx_orientation_deg": f"{rx_orientation:.17g}",
            "seed": str(seed),
            "averaging": str(averaging),
            "tx_power_dbm": f"{tx_power_dbm:.17g}",
            "snapshot_start_s": f"{snapshot_start:.17g}",
        },
    }
    if geo is not None:
        metadata["capture"]["geo_lat"] = f"{geo[0]:.17g}"
        metadata["capture"]["geo_lon"] = f"{geo[1]:.17g}"
    metadata.update(plan_sections(plan))
    metadata.update(schedule_sections(sched))
    from .beams import codebook_sections

    metadata.update(codebook_sections(tx_cb, "codebook_tx"))
    metadata.update(codebook_sections(rx_cb, "codebook_rx"))
    metadata.update(clock_sections(tx_clock, "tx"))
    metadata.update(clock_sections(rx_clock, "rx"))
    metadata.update(front_end_sections(fe))
    metadata.update(channel_sections(ch))
    return CaptureSet(metadata, tuple(records))


def simulate_calibration(
    codebooks,
    fe: RxFrontEnd,
    seed: int = 0,
    plan: TonePlan | None = None,
    averaging: int = 100,
    cal_power_dbm: float = -10.0,
    mode: str = "shared",
) -> CaptureSet:
    """Back-to-back capture of the chain response (H_cal).

    "shared" (default) stores one record: the common hardware ripple,
    measured with the boresight pair. "per_pair" stores one record per
    azimuth-row beam pair whose response additionally carries both beam
    peak gains; dividing by it de-embeds the beams as well.
    """
    plan = plan or default_plan()
    tx_cb, rx_cb = _check_pair(codebooks)
    if mode not in ("shared", "per_pair"):
        raise ConfigError(f"unknown calibration mode: {mode}")
    ripple = ripple_response(fe, plan.frequencies)

    from .beams import gain

    records = []
    if mode == "shared":
        tx0 = min(tx_cb.patterns, key=lambda bp: abs(bp[1].steering[0]) + abs(bp[1].steering[1]))
        rx0 = min(rx_cb.patterns, key=lambda bp: abs(bp[1].steering[0]) + abs(bp[1].steering[1]))
        res = apply_front_end(
            ripple, fe, cal_power_dbm, averaging, _slot_seed(seed, 0),
            plan.tone_spacing,
        )
        records.append(
            CaptureRecord(0, tx0[0], rx0[0], 0, 0.0, res.h, res.agc_gain, res.clipped)
        )
    else:
        idx = 0
        for tx_id, tx_pat in tx_cb.azimuth_row():
            g_tx = gain(tx_pat, tx_pat.steering[0], tx_pat.steering[1])
            for rx_id, rx_pat in rx_cb.azimuth_row():
                g_rx = gain(rx_pat, rx_pat.steering[0], rx_pat.steering[1])
                res = apply_front_end(
                    ripple * (g_tx * g_rx), fe, cal_power_dbm, averaging,
                    _slot_seed(seed, idx), plan.tone_spacing,
                )
                records.append(
                    CaptureRecord(idx, tx_id, rx_id, 0, 0.0, res.h, res.agc_gain, res.clipped)
                )
                idx += 1

    metadata: dict[str, dict[str, str]] = {
        "capture": {
            "format_version": str(FORMAT_VERSION),
            "kind": "calibration",
            "cal_mode": mode,
            "rx_orientation_deg": "0",
            "seed": str(seed),
            "averaging": str(averaging),
            "cal_power_dbm": f"{cal_power_dbm:.17g}",
        },
    }
    metadata.update(plan_sections(plan))
    from .beams import codebook_sections

    metadata.update(codebook_sections(tx_cb, "codebook_tx"))
    metadata.update(codebook_sections(rx_cb, "codebook_rx"))
    metadata.update(front_end_sections(fe))
    return CaptureSet(metadata, tuple(records))


def resimulate(cap: CaptureSet) -> CaptureSet:
    """Re-run a field capture from nothing but its metadata."""
    if cap.kind != "field":
        raise ConfigError("resimulate needs a field capture")
    ch = cap.channel()
    if ch is None:
        raise ConfigError("capture metadata has no channel spec")
    sec = cap.metadata["capture"]
    return simulate_capture(
        ch,
        cap.schedule(),
        cap.codebooks(),
        cap.clocks(),
        cap.front_end(),
        cap.rx_orientation,
        cap.seed,
        int(sec["averaging"]),
        float(sec["tx_power_dbm"]),
        cap.tone_plan(),
        float(sec["snapshot_start_s"]),
    )
