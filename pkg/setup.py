"""Build script: compiles the fast kernels when a toolchain is available.

The package works without the extension (a NumPy implementation is selected
at import time), so a failed compile only costs speed.
"""
import warnings

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible; fall back to pure NumPy otherwise."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # toolchain missing
            warnings.warn(f"skipping compiled kernels ({exc}); using NumPy backend")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            warnings.warn(f"failed to build {ext.name} ({exc}); using NumPy backend")


def _extensions():
    try:
        import numpy
        from Cython.Build import cythonize
    except ImportError:
        return []
    return cythonize(
        [
            Extension(
                "strokekit._kernels._fast",
                ["src/strokekit/_kernels/_fast.pyx"],
                include_dirs=[numpy.get_include()],
            )
        ],
        language_level=3,
    )


setup(ext_modules=_extensions(), cmdclass={"build_ext": optional_build_ext})
