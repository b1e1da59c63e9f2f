import numpy as np
from Cython.Build import cythonize
from setuptools import Extension, setup

extensions = [
    Extension(
        "ivelab._kernels._tabular_core",
        ["src/ivelab/_kernels/_tabular_core.pyx"],
        include_dirs=[np.get_include()],
        # no fast-math or FMA contraction: results must match the numpy fallback
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(
    ext_modules=cythonize(
        extensions,
        compiler_directives={"language_level": "3"},
    )
)
