# cython: boundscheck=False, wraparound=False, cdivision=True
"""Hot kernel: cascaded biquad filtering, direct form II transposed.

Mirrors the arithmetic order of scipy.signal.sosfilt so the pure-Python
fallback and this extension produce the same results.
"""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def sosfilt_stream(cnp.float64_t[:, ::1] sos,
                   cnp.float64_t[:, ::1] x,
                   cnp.float64_t[:, :, ::1] zi):
    """Filter channel-major data in place through an SOS cascade.

    sos: (n_sections, 6) [b0 b1 b2 a0 a1 a2], a0 == 1
    x:   (n_channels, n_samples), overwritten with the output
    zi:  (n_channels, n_sections, 2) delay state, updated in place
    """
    cdef Py_ssize_t n_sections = sos.shape[0]
    cdef Py_ssize_t n_channels = x.shape[0]
    cdef Py_ssize_t n_samples = x.shape[1]
    cdef Py_ssize_t c, i, s
    cdef double x_cur, x_new

    for c in range(n_channels):
        for i in range(n_samples):
            x_cur = x[c, i]
            for s in range(n_sections):
                x_new = sos[s, 0] * x_cur + zi[c, s, 0]
                zi[c, s, 0] = sos[s, 1] * x_cur - sos[s, 4] * x_new + zi[c, s, 1]
                zi[c, s, 1] = sos[s, 2] * x_cur - sos[s, 5] * x_new
                x_cur = x_new
            x[c, i] = x_cur
