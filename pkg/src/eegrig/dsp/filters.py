"""Causal IIR filter design and streaming application.

Butterworth bandpass/notch designs as cascaded biquads; real-time use means
no zero-phase tricks anywhere.  Streaming state lives in StreamingFilter so
chunked processing is bit-identical to one-shot processing.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal

from ..chunk import SignalChunk
from . import kernels


class FilterDesignError(ValueError):
    pass


@dataclass(frozen=True)
class FilterSpec:
    kind: str           # "bandpass" | "notch"
    low_hz: float
    high_hz: float
    order: int          # overall order; bandpass of order 4 = 2 biquads
    fs: float

    def __post_init__(self):
        if not 0 < self.low_hz < self.high_hz < self.fs / 2:
            raise FilterDesignError(
                f"band {self.low_hz}-{self.high_hz} Hz invalid for fs={self.fs}")
        if self.order not in (2, 4, 6, 8):
            raise FilterDesignError("order must be 2, 4, 6 or 8")
        if self.kind not in ("bandpass", "notch"):
            raise FilterDesignError(f"unknown filter kind {self.kind!r}")


def design_bandpass(spec: FilterSpec) -> np.ndarray:
    """Butterworth bandpass SOS; -3 dB at the band edges by construction."""
    if spec.kind != "bandpass":
        raise FilterDesignError("spec is not a bandpass")
    return signal.butter(spec.order // 2, [spec.low_hz, spec.high_hz],
                         btype="bandpass", fs=spec.fs, output="sos")


def design_notch(spec: FilterSpec) -> np.ndarray:
    """Butterworth band-stop between low_hz and high_hz."""
    if spec.kind != "notch":
        raise FilterDesignError("spec is not a notch")
    return signal.butter(spec.order // 2, [spec.low_hz, spec.high_hz],
                         btype="bandstop", fs=spec.fs, output="sos")


def design(spec: FilterSpec) -> np.ndarray:
    return design_bandpass(spec) if spec.kind == "bandpass" else design_notch(spec)


def magnitude_response(sos: np.ndarray, freqs_hz, fs: float) -> np.ndarray:
    """|H(f)| at the given frequencies."""
    _, h = signal.sosfreqz(sos, worN=2 * np.pi * np.asarray(freqs_hz, dtype=float) / fs)
    return np.abs(h)


def analytic_butter_bandpass_magnitude(low_hz, high_hz, order, freqs_hz, fs=None):
    """Independent oracle: closed-form Butterworth bandpass |H|.

    Lowpass prototype plus the standard bandpass frequency transform; no
    digital design code shared with design_bandpass.  When fs is given, the
    frequency axis is prewarped (tan map) so the formula is exact for a
    causal bilinear-transform digital design; without fs it is the pure
    analog response.
    """
    freqs = np.asarray(freqs_hz, dtype=float)
    if fs is not None:
        warp = lambda f: (fs / np.pi) * np.tan(np.pi * np.asarray(f, dtype=float) / fs)
        low_hz, high_hz, freqs = warp(low_hz), warp(high_hz), warp(freqs)
    w0 = 2 * np.pi * np.sqrt(low_hz * high_hz)
    bw = 2 * np.pi * (high_hz - low_hz)
    w = 2 * np.pi * freqs
    with np.errstate(divide="ignore", invalid="ignore"):
        wl = np.where(w > 0, (w * w - w0 * w0) / (bw * w), np.inf)
    n = order // 2  # prototype lowpass order
    return 1.0 / np.sqrt(1.0 + wl ** (2 * n))


class StreamingFilter:
    """Per-channel SOS cascade with carried state.

    Construct once per stream; feeding chunks of any sizes yields exactly the
    same output as feeding the concatenated stream in one call.
    """

    def __init__(self, spec: FilterSpec, n_channels: int = 8):
        self.spec = spec
        self.sos = np.ascontiguousarray(design(spec), dtype=np.float64)
        self.n_channels = n_channels
        self._zi = np.zeros((n_channels, self.sos.shape[0], 2))

    def reset(self):
        self._zi[:] = 0.0

    def process_array(self, x: np.ndarray) -> np.ndarray:
        x = np.atleast_2d(x)
        if x.shape[0] != self.n_channels:
            raise ValueError(f"expected {self.n_channels} channels, got {x.shape[0]}")
        return kernels.sosfilt_stream(self.sos, x, self._zi)

    def process(self, chunk: SignalChunk) -> SignalChunk:
        if chunk.fs != self.spec.fs:
            raise ValueError("chunk sample rate does not match filter design")
        return SignalChunk(self.process_array(chunk.data), chunk.start_index, chunk.fs)


def filter_array(spec: FilterSpec, x: np.ndarray) -> np.ndarray:
    """One-shot convenience for offline analysis."""
    x = np.atleast_2d(x)
    f = StreamingFilter(spec, n_channels=x.shape[0])
    return f.process_array(x)
