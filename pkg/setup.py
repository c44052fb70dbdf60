"""Build script for the compiled DSP kernels.

The package works without the extension (a scipy fallback is selected at
import time); building it just makes the streaming filter path faster.

    pip install -e . --no-build-isolation
"""

import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "eegrig.dsp._biquad",
        ["src/eegrig/dsp/_biquad.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    ),
]

setup(ext_modules=cythonize(extensions, language_level="3"))
