"""Build script for the compiled kernel extension.

The package works without the extension (a numpy fallback is selected at
import time); set COEDIT_SKIP_NATIVE=1 to skip compilation entirely.
"""
import os

from setuptools import setup

extensions = []
if not os.environ.get("COEDIT_SKIP_NATIVE"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        extensions = cythonize(
            [
                Extension(
                    "coedit._kernels._native",
                    ["src/coedit/_kernels/_native.pyx"],
                    include_dirs=[np.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        extensions = []

setup(ext_modules=extensions)
