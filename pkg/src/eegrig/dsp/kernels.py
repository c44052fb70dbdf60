"""Backend selection for the streaming filter kernel.

The compiled extension is used when present; otherwise scipy.signal.sosfilt
does the same direct-form-II-transposed cascade.  Set EEGRIG_NO_EXT=1 to
force the fallback (the benchmark uses this to compare both paths).
"""

from __future__ import annotations

import os

import numpy as np
from scipy import signal as _signal

try:
    if os.environ.get("EEGRIG_NO_EXT"):
        raise ImportError("extension disabled via EEGRIG_NO_EXT")
    from . import _biquad
    HAVE_EXTENSION = True
except ImportError:
    _biquad = None
    HAVE_EXTENSION = False

BACKEND = "cython" if HAVE_EXTENSION else "scipy"


def sosfilt_stream(sos: np.ndarray, x: np.ndarray, zi: np.ndarray) -> np.ndarray:
    """Filter (n_channels, n_samples) data, updating zi in place.

    zi has shape (n_channels, n_sections, 2).  Returns the filtered data;
    chunk-wise calls are exactly equivalent to one whole-stream call.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if HAVE_EXTENSION:
        y = x.copy()
        _biquad.sosfilt_stream(sos, y, zi)
        return y
    # scipy wants zi as (n_sections, n_channels, 2) on axis=-1 filtering
    zi_s = np.ascontiguousarray(np.swapaxes(zi, 0, 1))
    y, zi_out = _signal.sosfilt(sos, x, axis=-1, zi=zi_s)
    zi[...] = np.swapaxes(zi_out, 0, 1)
    return y
