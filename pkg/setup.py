"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure-NumPy fallback is selected
at import time); set SCALEMATCH_NO_EXT=1 to skip compiling it.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("SCALEMATCH_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize

        ext = Extension(
            "scalematch._kernels._native",
            sources=["src/scalematch/_kernels/_native.pyx"],
            include_dirs=[np.get_include()],
            # -ffp-contract=off keeps float results bit-identical to the
            # NumPy fallback (no fused multiply-add in the inner loops).
            extra_compile_args=["-O3", "-ffp-contract=off"],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
        ext_modules = cythonize([ext], language_level=3)
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
