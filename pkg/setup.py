"""Build the optional Cython kernels.

If Cython or a compiler is missing the package still installs; the
pure-Python kernels in ``pacer._kernels_py`` are used instead.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("PACER_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "pacer._kernels",
                    ["src/pacer/_kernels.pyx"],
                    include_dirs=[np.get_include()],
                    # bit-identical results with the Python fallback need plain IEEE doubles
                    extra_compile_args=["-O2", "-ffp-contract=off", "-fno-fast-math"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
