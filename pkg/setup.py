import numpy as np
from setuptools import setup, Extension

try:
    from Cython.Build import cythonize
except ImportError:
    cythonize = None

# The compiled kernels are an optional accelerator: the package falls back to
# the pure-numpy implementations in swapkit._kernels._numpy when the extension
# is absent, so a failed build is not fatal to installation.
if cythonize is not None:
    ext_modules = cythonize(
        [
            Extension(
                "swapkit._kernels._native",
                ["src/swapkit/_kernels/_native.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3", "-ffp-contract=off"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        language_level=3,
    )
else:
    ext_modules = []

setup(ext_modules=ext_modules)
