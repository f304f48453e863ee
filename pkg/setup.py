import os

import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

ext_modules = []
if os.environ.get("TBRW_NO_EXT", "") in ("", "0"):
    ext_modules = cythonize(
        [
            Extension(
                "tbrw._ckernels",
                sources=["src/tbrw/_ckernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
