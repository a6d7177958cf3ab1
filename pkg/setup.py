"""Build script: compiles the optional Cython kernel module.

The package works without the extension (a pure-Python twin is selected at
import time), so any compilation failure downgrades to a warning instead of
aborting the install.
"""

import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """build_ext that treats the extension as a nice-to-have."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - exercised only on broken toolchains
            warnings.warn(f"compiled kernels skipped ({exc}); using pure-Python backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover
            warnings.warn(f"compiled kernels skipped ({exc}); using pure-Python backend")


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:  # pragma: no cover
        return []
    ext = Extension(
        "starweyl._core",
        sources=["src/starweyl/_core.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(ext_modules=extensions(), cmdclass={"build_ext": OptionalBuildExt})
