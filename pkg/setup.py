"""Build script: compiles the optional Cython propagation kernel.

The package is fully functional without the extension (a pure-numpy
fallback is selected at import time), so any failure to build it is
downgraded to a warning.
"""

import sys

from setuptools import setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "rcdsim._kernels._lindblad_cy",
                ["src/rcdsim/_kernels/_lindblad_cy.pyx"],
                include_dirs=[numpy.get_include()],
                # -fcx-limited-range: plain complex multiply, no __muldc3 calls
                extra_compile_args=["-O3", "-fcx-limited-range"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build-environment dependent
    sys.stderr.write(f"rcdsim: skipping compiled kernel ({exc}); "
                     "pure-Python fallback will be used\n")

setup(ext_modules=ext_modules)
