"""Build script for the optional compiled demeaning kernel.

The package is fully functional without the extension (a numpy fallback is
selected at import time).  Set CUGRAVITY_PURE=1 to skip compilation, e.g. on
machines without a C toolchain.
"""

import os

from setuptools import Extension, setup

ext_modules = []
if not os.environ.get("CUGRAVITY_PURE"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "cugravity._kernels._demean_cy",
                    ["src/cugravity/_kernels/_demean_cy.pyx"],
                    include_dirs=[numpy.get_include()],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                    extra_compile_args=["-O3"],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
