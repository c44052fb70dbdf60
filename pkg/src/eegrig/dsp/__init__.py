from .filters import (
    FilterDesignError, FilterSpec, StreamingFilter,
    analytic_butter_bandpass_magnitude, design_bandpass, design_notch,
    filter_array, magnitude_response,
)
from .kernels import BACKEND, HAVE_EXTENSION, sosfilt_stream
from .power import band_power, band_power_array, total_power
from .wavelet import OMEGA0, Scalogram, cwt_morlet, morlet_kernel
from .epochs import Epoch, epoch_extract

__all__ = [
    "FilterDesignError", "FilterSpec", "StreamingFilter",
    "analytic_butter_bandpass_magnitude", "design_bandpass", "design_notch",
    "filter_array", "magnitude_response", "BACKEND", "HAVE_EXTENSION",
    "sosfilt_stream", "band_power", "band_power_array", "total_power",
    "OMEGA0", "Scalogram", "cwt_morlet", "morlet_kernel", "Epoch",
    "epoch_extract",
]
