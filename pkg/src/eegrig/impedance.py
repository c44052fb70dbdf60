"""Electrode contact impedance from lead-off current injection.

With a known AC current driven through an electrode, the contact impedance
shows up as a narrowband tone whose size is Z times the drive; a 1 Hz-wide
band filter around the drive frequency pulls the tone out of the EEG and
Z = Vpp / Ipp recovers the magnitude.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .dsp.filters import FilterSpec, filter_array

DEFAULT_DRIVE_CURRENT_A = 24e-9
DEFAULT_DRIVE_FREQ_HZ = 31.2

# quality tiers; boundaries inclusive on the lower tier
TIER_LIMITS = (("good", 10e3), ("acceptable", 50e3), ("poor", 200e3))


@dataclass(frozen=True)
class ImpedanceReading:
    channel: int
    ohms: float
    drive_freq_hz: float
    quality: str


class InjectionStateError(RuntimeError):
    """Measurement requested without active lead-off injection."""


def classify_quality(ohms: float) -> str:
    if ohms < 0:
        raise ValueError("impedance must be >= 0")
    for tier, limit in TIER_LIMITS:
        if ohms <= limit:
            return tier
    return "open"


def measure_impedance(x: np.ndarray, channel: int, fs: float,
                      current_amps: float = DEFAULT_DRIVE_CURRENT_A,
                      frequency_hz: float = DEFAULT_DRIVE_FREQ_HZ,
                      settle_s: float = 0.5) -> ImpedanceReading:
    """Estimate contact impedance from a captured single-channel window.

    x is the calibrated microvolt stream of the channel while injection is
    active; needs >= 1 s of samples after settle.
    """
    if frequency_hz >= fs / 2:
        raise ValueError("drive frequency must be below Nyquist")
    x = np.asarray(x, dtype=float).ravel()
    if len(x) < (1.0 + settle_s) * fs:
        raise ValueError("need at least 1 s of samples after filter settle")
    half_bw = 0.5
    spec = FilterSpec("bandpass", frequency_hz - half_bw, frequency_hz + half_bw, 4, fs)
    tone = filter_array(spec, x[np.newaxis, :])[0]
    seg = tone[int(settle_s * fs):]
    rms_uv = np.sqrt(np.mean(seg * seg))
    a_pp_uv = 2 * np.sqrt(2) * rms_uv
    ohms = (a_pp_uv * 1e-6) / current_amps
    return ImpedanceReading(channel, float(ohms), frequency_hz, classify_quality(ohms))
