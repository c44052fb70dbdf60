"""Complex Morlet scalogram for time-frequency views of single channels."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import signal as _signal

OMEGA0 = 6.0   # time/frequency trade-off of the mother wavelet


@dataclass
class Scalogram:
    freqs_hz: np.ndarray        # (n_freqs,)
    times: np.ndarray           # sample indices, (n_times,)
    magnitude: np.ndarray       # (n_freqs, n_times), µV-scaled, >= 0
    valid: np.ndarray           # bool mask, False inside the cone of influence

    def peak_frequency(self, col_slice=slice(None)) -> float:
        """Frequency of the largest valid coefficient over the given columns."""
        mag = np.where(self.valid, self.magnitude, 0.0)[:, col_slice]
        row = np.unravel_index(np.argmax(mag), mag.shape)[0]
        return float(self.freqs_hz[row])


def _sigma_t(freq_hz: float) -> float:
    return OMEGA0 / (2 * np.pi * freq_hz)


def morlet_kernel(freq_hz: float, fs: float) -> np.ndarray:
    """Analytic Morlet atom, normalized so a unit real sinusoid at freq_hz
    produces peak magnitude 1."""
    sigma = _sigma_t(freq_hz)
    half = int(np.ceil(4 * sigma * fs))
    t = np.arange(-half, half + 1) / fs
    env = np.exp(-t * t / (2 * sigma * sigma))
    kernel = env * np.exp(2j * np.pi * freq_hz * t)
    return kernel * (2.0 / env.sum())


def cwt_morlet(x: np.ndarray, fs: float, freqs_hz) -> Scalogram:
    """Scalogram of one channel over a frequency grid.

    Coefficients closer to a window edge than one envelope e-folding of the
    analysis wavelet are flagged invalid (cone of influence).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.ndim != 1:
        raise ValueError("cwt_morlet expects a single channel")
    freqs = np.asarray(freqs_hz, dtype=float)
    if freqs.size == 0 or np.any(freqs <= 0) or np.any(freqs >= fs / 2):
        raise ValueError("analysis frequencies must lie in (0, fs/2)")
    min_len = 2 * fs / freqs.min()
    if x.size < min_len:
        raise ValueError("window shorter than 2 cycles of the lowest frequency")

    n = x.size
    mag = np.empty((freqs.size, n))
    valid = np.ones((freqs.size, n), dtype=bool)
    idx = np.arange(n)
    for i, f in enumerate(freqs):
        kernel = morlet_kernel(f, fs)
        coeff = _signal.fftconvolve(x, kernel, mode="same")
        mag[i] = np.abs(coeff)
        efold = int(np.ceil(np.sqrt(2) * _sigma_t(f) * fs))
        valid[i] = (idx >= efold) & (idx < n - efold)
    return Scalogram(freqs, idx, mag, valid)
