import numpy as np
from setuptools import Extension, setup

# The compiled kernel is optional: the package falls back to the NumPy
# implementation at import time if the extension is missing.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "xkmedians._kernels",
                ["src/xkmedians/_kernels.pyx"],
                include_dirs=[np.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
    )
except Exception as exc:  # pragma: no cover - build environments without Cython
    print(f"warning: building without compiled kernels ({exc})")
    ext_modules = []

setup(ext_modules=ext_modules)
