import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "pairjump._core",
        ["src/pairjump/_core.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-fcx-limited-range"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

# PAIRJUMP_NO_EXT=1 installs the pure-Python fallback only
setup(ext_modules=[] if os.environ.get("PAIRJUMP_NO_EXT") else cythonize(
    extensions, compiler_directives={"language_level": "3"}))
