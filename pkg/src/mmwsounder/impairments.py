"""Hardware non-idealities: reference-clock phase drift, thermal noise,
AGC, converter quantization, and the front-end frequency ripple.

Conventions used throughout:
  * signal samples are complex baseband in sqrt(mW), so 10*log10(|x|^2)
    is instantaneous power in dBm and tone powers add directly;
  * clock phase is the absolute LO phase of one side; a capture applies
    exp(j*(phi_tx - phi_rx)), so common-mode terms cancel;
  * every random element is a pure function of (model, seed, t) so a
    capture can be re-simulated bit-exactly from its metadata.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from functools import lru_cache

import numpy as np

from .errors import ConfigError

# 4 degrees accumulated over one 1.444 ms sweep is the observed
# free-running two-oscillator drift; keep the exact ratio, not a rounding.
FREE_RUNNING_DRIFT_RATE = math.radians(4.0) / 1.444e-3

DEFAULT_DRIFT_NOISE_RMS = math.radians(0.2)

THERMAL_NOISE_DBM_PER_HZ = -174.0

# Comb of 500 kHz tones: one tone integrates noise over one comb spacing.
DEFAULT_TONE_BANDWIDTH = 5e5

DEFAULT_AGC_BACKOFF_DB = 6.0


class ClockMode(Enum):
    SHARED = "shared"
    GPS_DISCIPLINED = "gps"
    FREE_RUNNING = "free"


@dataclass(frozen=True)
class ClockModel:
    """Oscillator phase versus time for one side of the link.

    Fields left as None are resolved at construction from `seed`:
    drift_rate (GPS mode draws uniformly below the free-running rate,
    reflecting that disciplined stability falls between the shared and
    free-running extremes) and initial_phase (each PLL lock event lands
    on a random phase). Resolved values are stored, so re-building a
    model from recorded metadata never re-rolls them.
    """

    mode: ClockMode = ClockMode.SHARED
    initial_phase: float | None = None
    drift_rate: float | None = None
    drift_noise_rms: float = DEFAULT_DRIFT_NOISE_RMS
    seed: int = 0

    def __post_init__(self):
        rng = np.random.default_rng(self.seed)
        rate = self.drift_rate
        if rate is None:
            if self.mode is ClockMode.SHARED:
                rate = 0.0
            elif self.mode is ClockMode.FREE_RUNNING:
                rate = FREE_RUNNING_DRIFT_RATE
            else:
                rate = rng.uniform(0.0, FREE_RUNNING_DRIFT_RATE)
        phase = self.initial_phase
        if phase is None:
            phase = 0.0 if self.mode is ClockMode.SHARED else rng.uniform(0.0, 2 * np.pi)
        noise = 0.0 if self.mode is ClockMode.SHARED else self.drift_noise_rms
        object.__setattr__(self, "drift_rate", float(rate))
        object.__setattr__(self, "initial_phase", float(phase))
        object.__setattr__(self, "drift_noise_rms", float(noise))


def shared_clock(initial_phase: float = 0.0) -> ClockModel:
    return ClockModel(ClockMode.SHARED, initial_phase)


def free_running_clock(seed: int = 0, initial_phase: float | None = None) -> ClockModel:
    return ClockModel(ClockMode.FREE_RUNNING, initial_phase, seed=seed)


def gps_clock(seed: int = 0) -> ClockModel:
    return ClockModel(ClockMode.GPS_DISCIPLINED, seed=seed)


@lru_cache(maxsize=64)
def _noise_components(seed: int, rms: float):
    # Smooth residual around the linear trend: a fixed bank of seeded
    # sinusoids makes noise(t) a pure function of t (re-simulatable),
    # unlike a sample-path random walk. The band is kept slow (3-12 Hz)
    # because the modeled drift is essentially linear over a snapshot:
    # faster wander at this rms would contribute phase slopes rivaling
    # the free-running drift rate itself. Worst-case slope contamination
    # here is ~0.5 rad/s, about 1% of the free-running rate.
    k = 4
    rng = np.random.default_rng(seed ^ 0x5EED)
    freqs = 10 ** rng.uniform(np.log10(3.0), np.log10(12.0), k)
    phases = rng.uniform(0.0, 2 * np.pi, k)
    amp = rms * math.sqrt(2.0 / k)
    return freqs, phases, amp


def drift_phase(clock: ClockModel, t) -> np.ndarray | float:
    """Absolute oscillator phase in radians at time(s) t >= 0."""
    t = np.asarray(t, dtype=float)
    if np.any(t < 0):
        raise ConfigError("drift_phase requires t >= 0")
    phase = clock.initial_phase + clock.drift_rate * t
    if clock.drift_noise_rms > 0:
        freqs, phis, amp = _noise_components(clock.seed, clock.drift_noise_rms)
        phase = phase + amp * np.sin(
            2 * np.pi * np.outer(t, freqs) + phis
        ).sum(axis=-1).reshape(t.shape)
    return phase if phase.ndim else float(phase)


@dataclass(frozen=True)
class RxFrontEnd:
    """Receiver chain: LNA noise figure, AGC, and the ADC.

    adc_bits None (or inf) bypasses quantization; noise_figure of -inf
    disables thermal noise. With both disabled the chain is a perfect
    wire, which the tests use as the identity reference.

    ripple_seed, when set, gives the chain a fixed smooth frequency
    response within +/- ripple_db. It is the same response in every
    slot and in the calibration capture, which is exactly what makes
    calibration division remove it.
    """

    noise_figure: float = 5.0
    adc_bits: int | None = 10
    awg_bits: int = 15
    agc_gain_range: tuple[float, float] = (-60.0, 60.0)
    full_scale_power: float = 0.0
    agc_backoff: float = DEFAULT_AGC_BACKOFF_DB
    ripple_seed: int | None = None
    ripple_db: float = 1.0

    def __post_init__(self):
        bits = self.adc_bits
        if bits is not None and math.isinf(bits):
            bits = None
        if bits is not None and bits < 1:
            raise ConfigError(f"adc_bits must be >= 1, got {bits}")
        object.__setattr__(self, "adc_bits", bits)
        lo, hi = self.agc_gain_range
        if lo > hi:
            raise ConfigError("agc_gain_range must be (low, high)")


@dataclass(frozen=True)
class FrontEndResult:
    h: np.ndarray
    agc_gain: float
    clipped: bool


def noise_floor_dbm(fe: RxFrontEnd, bandwidth: float) -> float:
    """Input-referred thermal noise power over `bandwidth`."""
    return THERMAL_NOISE_DBM_PER_HZ + 10 * math.log10(bandwidth) + fe.noise_figure


def ripple_response(fe: RxFrontEnd, frequencies) -> np.ndarray:
    """The chain's complex frequency response across the given tones."""
    f = np.asarray(frequencies, dtype=float)
    if fe.ripple_seed is None:
        return np.ones(f.shape, dtype=complex)
    rng = np.random.default_rng(fe.ripple_seed)
    span = f.max() - f.min()
    u = (f - f.min()) / span if span > 0 else np.zeros_like(f)
    orders = np.arange(1, 7)
    amp_c = rng.standard_normal(orders.size)
    amp_p = rng.uniform(0, 2 * np.pi, orders.size)
    ph_c = rng.standard_normal(orders.size)
    ph_p = rng.uniform(0, 2 * np.pi, orders.size)
    shape = (amp_c[:, None] * np.cos(2 * np.pi * np.outer(orders, u) + amp_p[:, None])).sum(0)
    # Peak-normalize so the magnitude ripple stays strictly inside the band.
    gain_db = 0.9 * fe.ripple_db * shape / np.max(np.abs(shape))
    phase = (ph_c[:, None] * np.cos(2 * np.pi * np.outer(orders, u) + ph_p[:, None])).sum(0)
    phase = math.radians(10.0) * phase / np.max(np.abs(phase))
    return 10 ** (gain_db / 20) * np.exp(1j * phase)


def _quantize_midrise(x: np.ndarray, bits: int, full_scale: float):
    step = 2 * full_scale / (1 << bits)
    clipped = bool(np.any(np.abs(x) >= full_scale))
    codes = np.floor(x / step)
    top = (1 << (bits - 1)) - 1
    codes = np.clip(codes, -top - 1, top)
    return step * (codes + 0.5), clipped


def apply_front_end(
    h,
    fe: RxFrontEnd,
    rx_power: float,
    averaging: int = 1,
    seed: int = 0,
    tone_bandwidth: float = DEFAULT_TONE_BANDWIDTH,
) -> FrontEndResult:
    """Push one slot's per-tone response through the receiver chain.

    `h` carries the shape of the received spectrum; `rx_power` (dBm) sets
    its absolute level. The AGC picks one gain per slot from the ideal
    power (oracle AGC, 6 dB default back-off from full scale), thermal
    noise enters referred to the input, `averaging` coherent repeats
    scale the noise down, and I/Q are quantized separately. The returned
    vector is scaled back to the units of `h`, with the applied gain
    recorded; the gain is quantized to 0.01 dB so that the value stored
    in text metadata reproduces the division exactly.
    """
    h = np.asarray(h, dtype=complex)
    if averaging < 1:
        raise ConfigError(f"averaging must be >= 1, got {averaging}")
    total = np.sum(np.abs(h) ** 2)
    if total == 0:
        raise ConfigError("front end needs a nonzero input")

    gain = fe.full_scale_power - fe.agc_backoff - rx_power
    gain = min(max(gain, fe.agc_gain_range[0]), fe.agc_gain_range[1])
    gain = round(gain * 100) / 100

    noiseless = math.isinf(fe.noise_figure) and fe.noise_figure < 0
    if fe.adc_bits is None and noiseless:
        # Perfect wire: record the gain but never touch the samples, so
        # the identity path is exact rather than exact-up-to-rounding.
        return FrontEndResult(h.copy(), gain, False)

    scale = math.sqrt(10 ** (rx_power / 10) / total)
    lin = scale * 10 ** (gain / 20)

    x = h * lin
    if not noiseless:
        n_dbm = noise_floor_dbm(fe, tone_bandwidth) + gain
        sigma = math.sqrt(10 ** (n_dbm / 10) / averaging / 2)
        rng = np.random.default_rng(seed)
        x = x + sigma * (rng.standard_normal(h.shape) + 1j * rng.standard_normal(h.shape))

    clipped = False
    if fe.adc_bits is not None:
        fs = math.sqrt(10 ** (fe.full_scale_power / 10))
        re, clip_i = _quantize_midrise(x.real, fe.adc_bits, fs)
        im, clip_q = _quantize_midrise(x.imag, fe.adc_bits, fs)
        x = re + 1j * im
        clipped = clip_i or clip_q

    return FrontEndResult(x / lin, gain, clipped)


def clock_sections(clock: ClockModel, label: str) -> dict[str, dict[str, str]]:
    return {
        f"clock_{label}": {
            "mode": clock.mode.value,
            "initial_phase_rad": f"{clock.initial_phase:.17g}",
            "drift_rate_rad_s": f"{clock.drift_rate:.17g}",
            "drift_noise_rms_rad": f"{clock.drift_noise_rms:.17g}",
            "seed": str(clock.seed),
        }
    }


def clock_from_sections(sections, label: str) -> ClockModel:
    sec = sections[f"clock_{label}"]
    return ClockModel(
        ClockMode(sec["mode"]),
        float(sec["initial_phase_rad"]),
        float(sec["drift_rate_rad_s"]),
        float(sec["drift_noise_rms_rad"]),
        int(sec["seed"]),
    )


def front_end_sections(fe: RxFrontEnd) -> dict[str, dict[str, str]]:
    return {
        "front_end": {
            "noise_figure_db": f"{fe.noise_figure:.17g}",
            "adc_bits": "none" if fe.adc_bits is None else str(fe.adc_bits),
            "awg_bits": str(fe.awg_bits),
            "agc_gain_min_db": f"{fe.agc_gain_range[0]:.17g}",
            "agc_gain_max_db": f"{fe.agc_gain_range[1]:.17g}",
            "full_scale_power_dbm": f"{fe.full_scale_power:.17g}",
            "agc_backoff_db": f"{fe.agc_backoff:.17g}",
            "ripple_seed": "none" if fe.ripple_seed is None else str(fe.ripple_seed),
            "ripple_db": f"{fe.ripple_db:.17g}",
        }
    }


def front_end_from_sections(sections) -> RxFrontEnd:
    sec = sections["front_end"]
    adc = sec["adc_bits"]
    rip = sec["ripple_seed"]
    return RxFrontEnd(
        float(sec["noise_figure_db"]),
        None if adc == "none" else int(adc),
        int(sec["awg_bits"]),
        (float(sec["agc_gain_min_db"]), float(sec["agc_gain_max_db"])),
        float(sec["full_scale_power_dbm"]),
        float(sec["agc_backoff_db"]),
        None if rip == "none" else int(rip),
        float(sec["ripple_db"]),
    )
