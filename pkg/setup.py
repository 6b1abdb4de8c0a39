import os

import numpy as np
from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    USE_CYTHON = True
except ImportError:
    USE_CYTHON = False

# Building without Cython leaves the package on its NumPy fallback.
if USE_CYTHON and not os.environ.get("CDSYSID_NO_EXT"):
    extensions = cythonize(
        [
            Extension(
                "cdsysid._kernels",
                ["src/cdsysid/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
else:
    extensions = []

setup(ext_modules=extensions)
