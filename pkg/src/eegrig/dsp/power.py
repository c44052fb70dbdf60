"""Band power: filter to the band, then mean square over the window.

The first settle_s seconds are excluded so the filter transient does not
leak into the estimate; this definition is what the alpha detector
thresholds are calibrated against.
"""

from __future__ import annotations

import numpy as np

from ..chunk import SignalChunk
from .filters import FilterSpec, filter_array

DEFAULT_SETTLE_S = 0.5


def band_power_array(x: np.ndarray, fs: float, band: tuple[float, float],
                     order: int = 4, settle_s: float = DEFAULT_SETTLE_S) -> np.ndarray:
    """Mean squared band-limited amplitude per channel, in µV²."""
    x = np.atleast_2d(x)
    if x.shape[1] < fs:
        raise ValueError("band power needs at least 1 s of samples")
    spec = FilterSpec("bandpass", band[0], band[1], order, fs)
    y = filter_array(spec, x)
    skip = min(int(settle_s * fs), y.shape[1] - 1)
    seg = y[:, skip:]
    return np.mean(seg * seg, axis=1)


def band_power(window: SignalChunk, band: tuple[float, float],
               order: int = 4, settle_s: float = DEFAULT_SETTLE_S) -> np.ndarray:
    return band_power_array(window.data, window.fs, band, order, settle_s)


def total_power(x: np.ndarray) -> np.ndarray:
    x = np.atleast_2d(x)
    return np.mean(x * x, axis=1)
