"""Builds the optional compiled split-search kernel.

The package works without the extension (a NumPy fallback is selected at
import time), but tree training is several times faster with it.
"""

import numpy
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

extensions = []
if cythonize is not None:
    extensions = cythonize(
        [
            Extension(
                "autods._kernels._split",
                ["src/autods/_kernels/_split.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=extensions)
