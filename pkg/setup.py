"""Build script for the optional compiled kernel extension.

The package works without it (a numpy fallback is selected at import), so a
missing Cython or compiler degrades the build instead of breaking it.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [Extension("bogatse.kernels._core", ["src/bogatse/kernels/_core.pyx"])],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
