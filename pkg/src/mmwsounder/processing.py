"""Post-processing: calibration division, delay/angle products, drift
estimation, and path extraction.

The chain per beam pair is: unwind nothing (records already store
AGC-unwound responses), correct drift if asked, coherently average the
repetitions in the frequency domain, divide element-wise by the
calibration response, inverse-DFT to delay, magnitude-square. The
inverse transform uses the 1/N convention, which gives the working
identity  sum over delay bins = mean over tones of |H/H_cal|^2  exactly
(that is the Parseval check every capture is tested against).

Angular products never attempt phase-coherent stitching across RX
orientations; sums and maxima are power-domain only.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .capture import CaptureRecord, CaptureSet
from .errors import (
    CalibrationError,
    ConfigError,
    DriftEstimationError,
)

# Bins whose calibration magnitude falls this far below the cal median
# cannot be meaningfully divided.
_CAL_DEAD_RATIO = 1e-6


@dataclass(frozen=True)
class DirectionalPdp:
    """Power versus (TX beam, RX beam, delay) for one RX orientation."""

    p: np.ndarray
    delay_bin: float
    rx_orientation: float
    tx_angles: np.ndarray
    rx_angles: np.ndarray
    window: str = "rect"

    @property
    def delays(self) -> np.ndarray:
        return np.arange(self.p.shape[2]) * self.delay_bin


@dataclass(frozen=True)
class DriftEstimate:
    """Linear drift fit; iterates as (slope, residual_rms) for callers
    that only want the pair."""

    slope: float
    residual_rms: float
    ambiguous: bool = False

    def __iter__(self):
        return iter((self.slope, self.residual_rms))


@dataclass(frozen=True)
class PasResult:
    power: np.ndarray
    tx_angles: np.ndarray
    rx_angles_global: np.ndarray
    orientations: tuple[float, ...]


@dataclass(frozen=True)
class PathEstimate:
    delay: float
    delay_index: int
    aod_az: float
    aoa_az: float
    power_db: float


def _payload(records):
    # inserted reference slots carry repetition_index -1 and are not
    # part of the sweep payload
    return [r for r in records if r.repetition_index >= 0]


def _pair_index(records) -> tuple[list[int], list[int]]:
    tx = sorted({r.tx_beam.azimuth_index for r in records})
    rx = sorted({r.rx_beam.azimuth_index for r in records})
    return tx, rx


def _cal_table(cal: CaptureSet):
    """Calibration responses keyed by beam pair, or a single shared one."""
    if cal.kind != "calibration":
        raise CalibrationError("second argument must be a calibration capture")
    if cal.metadata["capture"].get("cal_mode", "shared") == "shared":
        return cal.records[0].h_measured, None
    table = {
        (r.tx_beam.azimuth_index, r.rx_beam.azimuth_index): r.h_measured
        for r in cal.records
    }
    return None, table


def _check_cal_vector(h_cal: np.ndarray) -> None:
    floor = _CAL_DEAD_RATIO * np.median(np.abs(h_cal))
    dead = np.nonzero(np.abs(h_cal) <= floor)[0]
    if dead.size:
        raise CalibrationError(
            f"calibration response is zero or near-zero at tone {dead[0]}"
            + (f" (and {dead.size - 1} more)" if dead.size > 1 else "")
        )


def directional_pdp(
    capture: CaptureSet,
    cal: CaptureSet,
    drift: float | None = None,
    window: str = "rect",
) -> DirectionalPdp:
    """Per-pair power delay profiles from one capture and a calibration.

    Repetitions of a pair are averaged coherently in the frequency
    domain (after the optional drift back-rotation). Inserted reference
    slots are excluded from the average; the calibration is
    divided out element-wise, and the 1/N inverse DFT takes the response
    to delay. Delay bin width is 1/(num_tones * tone_spacing).
    """
    if not capture.records:
        raise ConfigError("capture has no records")
    for key in ("num_tones", "tone_spacing_hz", "start_freq_hz"):
        if capture.metadata["tone_plan"][key] != cal.metadata["tone_plan"][key]:
            raise ConfigError(f"capture and calibration disagree on {key}")
    if window not in ("rect", "hann"):
        raise ConfigError(f"unknown window: {window}")

    shared_cal, pair_cal = _cal_table(cal)
    if shared_cal is not None:
        _check_cal_vector(shared_cal)

    payload = _payload(capture.records)
    if not payload:
        raise ConfigError("capture has no payload records")
    tx_idx, rx_idx = _pair_index(payload)
    tx_pos = {a: i for i, a in enumerate(tx_idx)}
    rx_pos = {a: i for i, a in enumerate(rx_idx)}
    n = capture.num_tones
    acc = np.zeros((len(tx_idx), len(rx_idx), n), dtype=complex)
    counts = np.zeros((len(tx_idx), len(rx_idx)), dtype=int)

    for r in payload:
        h = r.h_measured
        if drift is not None:
            h = h * np.exp(-1j * drift * r.start_time)
        i = tx_pos[r.tx_beam.azimuth_index]
        j = rx_pos[r.rx_beam.azimuth_index]
        acc[i, j] += h
        counts[i, j] += 1

    if counts.min() < 1 or counts.max() != counts.min():
        raise ConfigError(
            f"repetition counts differ across beam pairs "
            f"({counts.min()}..{counts.max()})"
        )
    avg = acc / counts[:, :, None]

    if pair_cal is None:
        avg = avg / shared_cal
    else:
        for (ai, i), (aj, j) in (
            ((a, tx_pos[a]), (b, rx_pos[b])) for a in tx_idx for b in rx_idx
        ):
            key = (ai, aj)
            if key not in pair_cal:
                raise CalibrationError(f"no calibration record for pair {key}")
            _check_cal_vector(pair_cal[key])
            avg[i, j] = avg[i, j] / pair_cal[key]

    if window == "hann":
        avg = avg * np.hanning(n)

    p = np.abs(np.fft.ifft(avg, axis=2)) ** 2
    plan = capture.tone_plan()
    tx_angles = np.array([_azimuth_of(a) for a in tx_idx])
    rx_angles = np.array([_azimuth_of(a) for a in rx_idx])
    return DirectionalPdp(
        p,
        1.0 / (plan.num_tones * plan.tone_spacing),
        capture.rx_orientation,
        tx_angles,
        rx_angles,
        window,
    )


def _azimuth_of(az_index: int) -> float:
    from .beams import ANGLE_STEP, AZ_START

    return AZ_START + ANGLE_STEP * az_index


def estimate_drift(capture: CaptureSet) -> DriftEstimate:
    """Weighted least-squares drift slope from the anchor-slot phases.

    Center-tone phases of the repeated reference pair are unwrapped
    sequentially and fit against slot time, weighted by tone power. The
    fit is flagged ambiguous (not rejected) when any adjacent-anchor
    step exceeds 180 degrees or the fitted drift wraps a full turn
    within the snapshot; the underlying guarantee is only that total
    drift stays under 360 degrees.
    """
    anchors = [r for r in capture.records if r.anchor]
    if len(anchors) < 2:
        raise DriftEstimationError(
            f"need at least 2 anchor slots, capture has {len(anchors)}"
        )
    mid = anchors[0].h_measured.size // 2
    t = np.array([r.start_time for r in anchors])
    raw = np.array([np.angle(r.h_measured[mid]) for r in anchors])
    amp2 = np.array([np.abs(r.h_measured[mid]) ** 2 for r in anchors])
    if np.all(amp2 == 0):
        raise DriftEstimationError("anchor slots carry no signal")
    phases = np.unwrap(raw)
    w = np.sqrt(amp2)
    slope, intercept = np.polyfit(t, phases, 1, w=w)
    residual = phases - (slope * t + intercept)
    span = t[-1] - t[0]
    # unwrap already folds every observed step into +-180 deg, so the
    # aliasing question must be asked of the fit: does the fitted rate
    # imply any adjacent anchors really moved more than half a turn?
    steps = abs(slope) * np.diff(t)
    ambiguous = bool(steps.size and steps.max() > np.pi)
    if abs(slope) * span >= 2 * np.pi:
        ambiguous = True
    return DriftEstimate(
        float(slope), float(np.sqrt(np.mean(residual**2))), ambiguous
    )


def correct_drift(capture: CaptureSet, slope: float) -> CaptureSet:
    """Back-rotate every record by the fitted linear drift."""
    if not math.isfinite(slope):
        raise ConfigError(f"drift slope must be finite, got {slope}")
    records = tuple(
        CaptureRecord(
            r.slot_index,
            r.tx_beam,
            r.rx_beam,
            r.repetition_index,
            r.start_time,
            r.h_measured * np.exp(-1j * slope * r.start_time),
            r.agc_gain,
            r.clipped,
            r.anchor,
        )
        for r in capture.records
    )
    metadata = {name: dict(sec) for name, sec in capture.metadata.items()}
    metadata.setdefault("processing", {})["drift_corrected_rad_s"] = f"{slope:.17g}"
    return CaptureSet(metadata, records)


def pas(pdps) -> PasResult:
    """Angular power spectrum over 360 degrees of RX azimuth.

    Input: DirectionalPdp per RX orientation (iterable or mapping
    orientation -> pdp). Each pair's delay-summed power lands at the
    global RX angle (local + orientation); the four 19-column orientation
    blocks are concatenated, so the output keeps 76 RX bins including
    the duplicated quadrant edges and the total is exactly the sum over
    all input tensors.
    """
    if hasattr(pdps, "values"):
        pdps = list(pdps.values())
    else:
        pdps = list(pdps)
    if not pdps:
        raise ConfigError("pas needs at least one directional PDP")
    seen = set()
    for pdp in pdps:
        if pdp.rx_orientation in seen:
            raise ConfigError(
                f"duplicate RX orientation {pdp.rx_orientation}"
            )
        seen.add(pdp.rx_orientation)
    from .beams import wrap_angle

    pdps = sorted(pdps, key=lambda d: d.rx_orientation)
    base = pdps[0]
    blocks = []
    angles = []
    for pdp in pdps:
        if pdp.p.shape[0] != base.p.shape[0] or not np.array_equal(
            pdp.tx_angles, base.tx_angles
        ):
            raise ConfigError("directional PDPs disagree on the TX beam grid")
        blocks.append(pdp.p.sum(axis=2))
        angles.append(wrap_angle(pdp.rx_angles + pdp.rx_orientation))
    return PasResult(
        np.concatenate(blocks, axis=1),
        base.tx_angles.copy(),
        np.concatenate(angles),
        tuple(d.rx_orientation for d in pdps),
    )


def sector_pdp(pdp: DirectionalPdp) -> np.ndarray:
    """Best-beam-pair power per delay bin for one orientation."""
    return pdp.p.max(axis=(0, 1))


def padp(pdp: DirectionalPdp) -> tuple[np.ndarray, np.ndarray]:
    """(RX-side, TX-side) power angular-delay profiles.

    The RX profile keeps (rx_angle, delay), maximized over TX beams;
    the TX profile keeps (tx_angle, delay), maximized over RX beams.
    """
    return pdp.p.max(axis=0), pdp.p.max(axis=1)


def path_loss_360(
    sector_pdps,
    system_gains: tuple[float, float],
    tx_power_per_tone: float = 0.0,
    threshold_db: float | None = None,
) -> float:
    """Isotropic path loss from the per-orientation sector PDPs.

    Sums all orientations and delay bins, then de-embeds the TX and RX
    peak beam gains (dBi). Captures here store transfer functions, so
    tx_power_per_tone stays 0; pass the per-tone TX power instead if the
    records are absolute received spectra. threshold_db, when given,
    drops bins more than that far below each vector's peak before
    summing (off by default: the untouched sum is the exact Eq. identity).
    """
    if hasattr(sector_pdps, "values"):
        vectors = list(sector_pdps.values())
    else:
        vectors = list(sector_pdps)
    if not vectors:
        raise ConfigError("path_loss_360 needs at least one sector PDP")
    total = 0.0
    for v in vectors:
        v = np.asarray(v, dtype=float)
        if threshold_db is not None and v.max() > 0:
            v = np.where(v >= v.max() * 10 ** (-threshold_db / 10), v, 0.0)
        total += float(v.sum())
    if total <= 0.0:
        raise ConfigError("total received power is zero; no path loss defined")
    g_tx, g_rx = system_gains
    return tx_power_per_tone + g_tx + g_rx - 10 * math.log10(total)


def extract_paths(
    pdp: DirectionalPdp,
    num_paths: int,
    min_separation_bins: int = 40,
) -> list[PathEstimate]:
    """Greedy PADP peak picking for planted-scene validation.

    Takes the strongest delay bin of the best-pair PDP, reads the
    (AoD, AoA) off the per-side profiles at that bin, masks the bin
    neighborhood, repeats. Suited to scenes whose paths are separated
    by more than the window leakage, which is what the synthetic
    scene generator guarantees.
    """
    if num_paths < 1:
        raise ConfigError("num_paths must be >= 1")
    best = sector_pdp(pdp).copy()
    rx_profile, tx_profile = padp(pdp)
    out = []
    for _ in range(num_paths):
        b = int(np.argmax(best))
        if best[b] <= 0:
            break
        i = int(np.argmax(tx_profile[:, b]))
        j = int(np.argmax(rx_profile[:, b]))
        out.append(
            PathEstimate(
                b * pdp.delay_bin,
                b,
                float(pdp.tx_angles[i]),
                float(pdp.rx_angles[j]),
                10 * math.log10(pdp.p[i, j, b]),
            )
        )
        lo = max(0, b - min_separation_bins)
        best[lo : b + min_separation_bins] = 0.0
    return sorted(out, key=lambda p: p.delay)
