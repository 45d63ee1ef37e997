import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

PYX = "src/vkcuam/kernels/_fastchain.pyx"

extensions = []
if os.path.exists(PYX):
    extensions.append(
        Extension(
            "vkcuam.kernels._fastchain",
            [PYX],
            include_dirs=[np.get_include()],
            define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
        )
    )

setup(ext_modules=cythonize(extensions, language_level=3))
