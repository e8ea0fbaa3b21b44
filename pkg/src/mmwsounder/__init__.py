"""Software twin of a beam-switched mm-wave phased-array channel sounder.

The pieces mirror the instrument: a low-PAPR multitone waveform
(`waveform`), steered beam codebooks (`beams`), synthetic propagation
channels (`channel`), the timed beam-sweep schedule (`sweep`), receiver
impairments (`impairments`), snapshot capture simulation (`capture`),
post-processing into delay/angle products (`processing`), the binary
capture container (`io`), and a command-line front end (`cli`).
"""

from .beams import (
    BeamCodebook,
    BeamId,
    BeamPattern,
    Side,
    default_codebook,
    gain,
    gain_db,
    link_budget,
)
from .capture import CaptureRecord, CaptureSet, simulate_calibration, simulate_capture
from .channel import (
    ChannelRealization,
    Mpc,
    los_channel,
    planted_nlos_channel,
    random_scene,
)
from .errors import (
    BadMagicError,
    CalibrationError,
    ConfigError,
    CrcMismatchError,
    DriftEstimationError,
    FormatError,
    GuardTimeError,
    ScheduleError,
    SounderError,
    TruncationError,
    UnsupportedVersionError,
)
from .impairments import (
    ClockMode,
    ClockModel,
    RxFrontEnd,
    free_running_clock,
    gps_clock,
    shared_clock,
)
from .io import container_bytes, container_from_bytes, read_capture, write_capture
from .processing import (
    DirectionalPdp,
    DriftEstimate,
    PasResult,
    PathEstimate,
    correct_drift,
    directional_pdp,
    estimate_drift,
    extract_paths,
    padp,
    pas,
    path_loss_360,
    sector_pdp,
)
from .sweep import SweepSchedule, build_schedule, describe, snapshot_cadence
from .waveform import (
    SoundingWaveform,
    TonePlan,
    default_plan,
    make_tone_plan,
    optimize_phases,
    papr_of_phases,
    tx_backoff,
    zadoff_chu_phases,
)

__version__ = "0.1.0"

__all__ = [
    "BadMagicError",
    "BeamCodebook",
    "BeamId",
    "BeamPattern",
    "CalibrationError",
    "CaptureRecord",
    "CaptureSet",
    "ChannelRealization",
    "ClockMode",
    "ClockModel",
    "ConfigError",
    "CrcMismatchError",
    "DirectionalPdp",
    "DriftEstimate",
    "DriftEstimationError",
    "FormatError",
    "GuardTimeError",
    "Mpc",
    "PasResult",
    "PathEstimate",
    "RxFrontEnd",
    "ScheduleError",
    "Side",
    "SounderError",
    "SoundingWaveform",
    "SweepSchedule",
    "TonePlan",
    "TruncationError",
    "UnsupportedVersionError",
    "build_schedule",
    "container_bytes",
    "container_from_bytes",
    "correct_drift",
    "default_codebook",
    "default_plan",
    "describe",
    "directional_pdp",
    "estimate_drift",
    "extract_paths",
    "free_running_clock",
    "gain",
    "gain_db",
    "gps_clock",
    "link_budget",
    "los_channel",
    "make_tone_plan",
    "optimize_phases",
    "padp",
    "papr_of_phases",
    "pas",
    "path_loss_360",
    "planted_nlos_channel",
    "random_scene",
    "read_capture",
    "sector_pdp",
    "shared_clock",
    "simulate_calibration",
    "simulate_capture",
    "snapshot_cadence",
    "tx_backoff",
    "write_capture",
    "zadoff_chu_phases",
]
