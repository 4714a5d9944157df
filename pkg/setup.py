"""Build script for the optional compiled integrator kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile must not break installation.
"""

from setuptools import setup
from setuptools.command.build_ext import build_ext


class OptionalBuildExt(build_ext):
    """Build the Cython kernel if possible, otherwise fall back silently."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler or Cython missing
            print(f"esdm: skipping compiled kernel ({exc}); "
                  "the pure-numpy backend will be used")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"esdm: failed to build {ext.name} ({exc}); "
                  "the pure-numpy backend will be used")


def make_extensions():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools.extension import Extension
    except ImportError:
        return []
    ext = Extension(
        "esdm._kernels._core",
        ["src/esdm/_kernels/_core.pyx"],
        include_dirs=[numpy.get_include()],
        # -ffp-contract=off keeps the scalar loop bit-identical to the
        # numpy backend (no FMA contraction of a*b+c).
        extra_compile_args=["-O3", "-ffp-contract=off"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], language_level=3)


setup(
    ext_modules=make_extensions(),
    cmdclass={"build_ext": OptionalBuildExt},
)
