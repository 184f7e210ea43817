"""Build script for the compiled simulation kernels.

The package works without the extension (a pure-Python twin is selected at
import time); set CRNRX_SKIP_EXT=1 to skip compilation entirely.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("CRNRX_SKIP_EXT"):
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext = Extension(
        "crnrx._kernels",
        ["src/crnrx/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    ext_modules = cythonize(
        [ext],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
            "initializedcheck": False,
        },
    )

setup(ext_modules=ext_modules)
