"""Build script: compiles the optional numeric kernel extension.

The extension is a speed layer only; if the build fails (no compiler,
no Cython) the package installs anyway and falls back to the pure
NumPy kernels at import time.
"""

import warnings

from setuptools import setup
from setuptools.command.build_ext import build_ext
from setuptools.errors import CCompilerError, ExecError, PlatformError


class optional_build_ext(build_ext):
    """Swallow compiler failures so a pure-Python install still works."""

    def run(self):
        try:
            super().run()
        except (CCompilerError, ExecError, PlatformError, FileNotFoundError) as exc:
            warnings.warn(f"compiled kernels unavailable, using pure backend: {exc}")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except (CCompilerError, ExecError, PlatformError, FileNotFoundError) as exc:
            warnings.warn(f"skipping {ext.name}: {exc}")


def extensions():
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        return []
    ext = Extension(
        "marlperf.numerics._kernels",
        sources=["src/marlperf/numerics/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
    return cythonize([ext], compiler_directives={"language_level": "3"})


setup(ext_modules=extensions(), cmdclass={"build_ext": optional_build_ext})
