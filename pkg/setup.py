"""Build hook for the optional Cython kernels.

The package works without a compiler: if the extension fails to build,
``gymjoin.kernels`` falls back to the pure-Python implementation.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("GYMJOIN_NO_EXT") != "1":
    try:
        from Cython.Build import cythonize
    except ImportError:
        cythonize = None
    if cythonize is not None:
        ext_modules = cythonize(
            [Extension("gymjoin._ckernels", ["src/gymjoin/_ckernels.pyx"], extra_compile_args=["-O3"])],
            compiler_directives={"language_level": "3", "boundscheck": False, "wraparound": False},
        )

setup(ext_modules=ext_modules)
