"""Build hook for the optional compiled core.

If Cython or a C compiler is missing the package still installs and runs on
the pure-Python fallback.
"""

import os

from setuptools import setup

ext_modules = []
if not os.environ.get("DDESPLIT_NO_EXT"):
    try:
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [Extension("ddesplit._core", ["src/ddesplit/_core.pyx"], extra_compile_args=["-O3"])],
            language_level=3,
            quiet=True,
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
