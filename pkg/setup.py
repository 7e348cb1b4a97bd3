"""Build script: compiles the optional split-search kernel.

The package works without the extension (a numpy fallback is selected at
import time), so a failed compile only costs speed, never functionality.
"""

from setuptools import Extension, setup

ext_modules = []
try:
    import numpy
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "lmtdock.tree._splitkern",
                ["src/lmtdock/tree/_splitkern.pyx"],
                include_dirs=[numpy.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )
except Exception as exc:  # pragma: no cover - build environment dependent
    print(f"lmtdock: skipping compiled kernel ({exc}); numpy fallback will be used")

setup(ext_modules=ext_modules)
