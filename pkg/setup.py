"""Build hook for the optional compiled kernels.

The package is fully functional without the extension: labgate._kernels
falls back to the pure-Python implementations when the compiled module
is absent. Building is therefore best-effort here.
"""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "labgate._kernels._native",
                sources=["src/labgate/_kernels/_native.pyx"],
            )
        ],
        language_level=3,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
