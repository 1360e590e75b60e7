import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("LTWALK_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "ltwalk._kernel",
                    ["src/ltwalk/_kernel.pyx"],
                    language="c++",
                    extra_compile_args=["-O3"],
                )
            ],
            language_level=3,
        )
    except ImportError:
        # No Cython available: install pure-Python only, the package
        # falls back to the numpy kernel at import time.
        ext_modules = []

setup(ext_modules=ext_modules)
