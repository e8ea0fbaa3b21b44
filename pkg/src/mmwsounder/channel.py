"""Synthetic double-directional channel realizations and the beam-pair
frequency response the sounder observes.

The sounder measures real channels; everything generated here is
validation scaffolding with planted ground truth. Amplitudes are
deterministic (no fading statistics), and time dependence enters only as
an optional per-path linear phase rotation.

Frequency convention: tone k of a plan maps to the absolute RF frequency
``carrier - IF_CENTER + start_freq + k * spacing``. The default 50..450 MHz
comb is thus centered on the carrier, and delay phase slopes are evaluated
at true RF so they stay physically consistent across the 400 MHz band.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import NDArray

from .beams import BeamPattern, gain, local_azimuth
from .errors import ConfigError
from .waveform import TonePlan

SPEED_OF_LIGHT = 299792458.0
DEFAULT_CARRIER = 27.85e9
IF_CENTER = 250e6


@dataclass(frozen=True)
class Mpc:
    """One multipath component. Amplitude is linear voltage gain; the
    propagation phase lives in the delay term, not here."""

    delay: float
    amplitude: complex
    aod_az: float
    aod_el: float
    aoa_az: float
    aoa_el: float
    doppler_phase_rate: float = 0.0

    def __post_init__(self) -> None:
        if self.delay < 0:
            raise ConfigError(f"delay must be >= 0, got {self.delay}")


@dataclass(frozen=True)
class ChannelRealization:
    mpcs: tuple[Mpc, ...]
    carrier_freq: float = DEFAULT_CARRIER
    tx_rx_distance: float | None = None
    label: str = "NLOS"


def los_channel(distance: float, carrier: float = DEFAULT_CARRIER) -> ChannelRealization:
    """Single free-space path between facing arrays.

    Both boresights point at each other, so AoD = AoA = 0 in each array's
    own frame; an RX orientation rotates the arrival angle downstream.
    """
    if distance <= 0:
        raise ConfigError(f"distance must be > 0, got {distance}")
    lam = SPEED_OF_LIGHT / carrier
    amp = lam / (4.0 * np.pi * distance)
    mpc = Mpc(distance / SPEED_OF_LIGHT, complex(amp), 0.0, 0.0, 0.0, 0.0)
    return ChannelRealization((mpc,), carrier, distance, "LOS")


def planted_nlos_channel(
    entries,
    seed: int | None = None,
    carrier: float = DEFAULT_CARRIER,
    delay_window: float = 2e-6,
) -> ChannelRealization:
    """Deterministic realization from explicit path tuples.

    Each entry is (delay_s, gain_db, aod_az, aoa_az[, aod_el, aoa_el,
    doppler_phase_rate]). Path phases are zero unless a seed is given, in
    which case they are drawn uniformly (deterministic per seed).
    """
    entries = list(entries)
    if not entries:
        raise ConfigError("planted channel needs at least one path")
    rng = np.random.default_rng(seed)
    mpcs = []
    for e in entries:
        e = tuple(e)
        if len(e) < 4:
            raise ConfigError(f"path entry needs at least 4 fields: {e}")
        delay, gain_db_, aod_az, aoa_az = e[:4]
        aod_el = e[4] if len(e) > 4 else 0.0
        aoa_el = e[5] if len(e) > 5 else 0.0
        doppler = e[6] if len(e) > 6 else 0.0
        if not 0.0 <= delay < delay_window:
            raise ConfigError(
                f"delay {delay} outside unambiguous window [0, {delay_window})"
            )
        phase = rng.uniform(0.0, 2.0 * np.pi) if seed is not None else 0.0
        amp = 10.0 ** (gain_db_ / 20.0) * np.exp(1j * phase)
        mpcs.append(Mpc(delay, complex(amp), aod_az, aod_el, aoa_az, aoa_el, doppler))
    return ChannelRealization(tuple(mpcs), carrier, None, "NLOS")


def random_scene(
    num_paths: int,
    seed: int,
    first_delay: float = 50e-9,
    min_delay_sep: float = 300e-9,
    dynamic_range: float = 30.0,
    strongest_gain_db: float = -95.0,
    carrier: float = DEFAULT_CARRIER,
    delay_grid: float | None = 1.0 / (801 * 5e5),
) -> ChannelRealization:
    """Random planted scene with recoverability guarantees.

    Delays are spaced at least min_delay_sep apart so rectangular-window
    delay sidelobes of a strong path cannot corrupt a weak one across the
    stated dynamic range, and land on the delay-bin grid: a path half-way
    between bins loses up to 3.9 dB to rectangular-window scalloping,
    which no blind peak reader can undo, so off-grid truth would make
    power comparisons test the window rather than the pipeline. Angles
    sit on a 15 deg grid inside the codebook field of view with a +-2 deg
    jitter, keeping paths at least three codebook steps apart on both
    ends. Elevations are 0 (azimuth sweep).
    """
    if num_paths < 1:
        raise ConfigError("num_paths must be >= 1")
    angle_grid = np.arange(-40.0, 40.1, 15.0)
    if num_paths > angle_grid.size:
        raise ConfigError(f"at most {angle_grid.size} paths fit the angle grid")
    rng = np.random.default_rng(seed)
    delays = first_delay + np.arange(num_paths) * min_delay_sep
    delays = delays + rng.uniform(0.0, 40e-9, num_paths)
    if delay_grid:
        delays = np.round(delays / delay_grid) * delay_grid
    aods = rng.permutation(angle_grid)[:num_paths] + rng.uniform(-2, 2, num_paths)
    aoas = rng.permutation(angle_grid)[:num_paths] + rng.uniform(-2, 2, num_paths)
    gains = np.full(num_paths, strongest_gain_db)
    if num_paths > 1:
        gains[1:] -= rng.uniform(3.0, dynamic_range, num_paths - 1)
    rng.shuffle(gains)
    entries = [
        (delays[i], gains[i], aods[i], aoas[i]) for i in range(num_paths)
    ]
    ch = planted_nlos_channel(entries, seed=seed + 1, carrier=carrier)
    return ch


def rf_frequencies(plan: TonePlan, carrier: float) -> NDArray[np.float64]:
    """Absolute RF frequency of every tone."""
    return carrier - IF_CENTER + plan.frequencies


def beam_pair_response(
    ch: ChannelRealization,
    tx_beam: BeamPattern,
    rx_beam: BeamPattern,
    rx_orientation: float,
    tones: TonePlan,
    t: float = 0.0,
) -> NDArray[np.complex128]:
    """Frequency response over the tone comb for one TX/RX beam pair.

    H(f_k) = sum over paths of
      amplitude * g_tx(AoD) * g_rx(AoA - orientation)
      * exp(-j 2 pi f_RF,k delay) * exp(j doppler_phase_rate t)
    """
    n = tones.num_tones
    if not ch.mpcs:
        return np.zeros(n, dtype=np.complex128)
    f_rf = rf_frequencies(tones, ch.carrier_freq)
    delays = np.array([m.delay for m in ch.mpcs])
    weights = np.array(
        [
            m.amplitude
            * gain(tx_beam, m.aod_az, m.aod_el)
            * gain(rx_beam, local_azimuth(m.aoa_az, rx_orientation), m.aoa_el)
            * np.exp(1j * m.doppler_phase_rate * t)
            for m in ch.mpcs
        ],
        dtype=np.complex128,
    )
    phase = np.exp(-2j * np.pi * np.outer(delays, f_rf))
    return weights @ phase


def channel_sections(ch: ChannelRealization) -> dict[str, dict[str, str]]:
    """Channel spec as an INI section, exact to the bit (17 digits)."""
    sec = {
        "label": ch.label,
        "carrier_freq_hz": f"{ch.carrier_freq:.17g}",
        "num_mpcs": str(len(ch.mpcs)),
    }
    if ch.tx_rx_distance is not None:
        sec["tx_rx_distance_m"] = f"{ch.tx_rx_distance:.17g}"
    for i, m in enumerate(ch.mpcs):
        sec[f"mpc_{i:03d}"] = ",".join(
            f"{v:.17g}"
            for v in (
                m.delay,
                m.amplitude.real,
                m.amplitude.imag,
                m.aod_az,
                m.aod_el,
                m.aoa_az,
                m.aoa_el,
                m.doppler_phase_rate,
            )
        )
    return {"channel": sec}


def channel_from_sections(sections) -> ChannelRealization:
    sec = sections["channel"]
    n = int(sec["num_mpcs"])
    mpcs = []
    for i in range(n):
        v = [float(x) for x in sec[f"mpc_{i:03d}"].split(",")]
        mpcs.append(Mpc(v[0], complex(v[1], v[2]), v[3], v[4], v[5], v[6], v[7]))
    distance = (
        float(sec["tx_rx_distance_m"]) if "tx_rx_distance_m" in sec else None
    )
    return ChannelRealization(
        tuple(mpcs), float(sec["carrier_freq_hz"]), distance, sec["label"]
    )
