import os

import numpy
from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the accelerator extension if a compiler is available.

    The package falls back to the numpy kernel implementations at import
    time, so a failed extension build must not fail the install.
    """

    def run(self):
        try:
            super().run()
        except Exception as exc:  # pragma: no cover - toolchain dependent
            print(f"warning: skipping compiled kernels ({exc}); "
                  "zadkit will use the numpy fallback")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:  # pragma: no cover - toolchain dependent
            print(f"warning: could not build {ext.name} ({exc}); "
                  "zadkit will use the numpy fallback")


extensions = [
    Extension(
        "zadkit._kernels",
        sources=["src/zadkit/_kernels.pyx"],
        include_dirs=[numpy.get_include()],
        extra_compile_args=["-O3"],
        define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
    )
]

if os.environ.get("ZADKIT_NO_EXT"):
    ext_modules = []
else:
    from Cython.Build import cythonize

    ext_modules = cythonize(extensions, language_level=3)

setup(
    ext_modules=ext_modules,
    cmdclass={"build_ext": optional_build_ext},
)
