"""Build script for the optional compiled kernel extension.

The package works without the extension (a pure Python/numpy fallback is
selected at import time), so a missing compiler or Cython is not fatal.
"""

from setuptools import setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        ["src/binpick/_speedups.pyx"],
        language_level=3,
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
