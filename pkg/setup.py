import numpy as np
from setuptools import setup
from setuptools.extension import Extension

from Cython.Build import cythonize

# -ffp-contract=off keeps C distance arithmetic bit-identical to the numpy
# fallback (no FMA contraction), so both backends return the same indices.
extensions = [
    Extension(
        "pointmeta._core",
        sources=["src/pointmeta/_core.pyx"],
        include_dirs=[np.get_include()],
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
)
