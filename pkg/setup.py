"""Build the optional compiled kernels.

The package works without them: ``forestdriver.kernels`` falls back to the
pure numpy implementations when ``forestdriver._ext`` cannot be imported.
"""
import os

from setuptools import setup

ext_modules = []
if not os.environ.get("FORESTDRIVER_NO_EXT"):
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        # no FMA contraction: the compiled and pure kernels must agree bit-for-bit
        cc_flags = ["-O3", "-ffp-contract=off", "-fno-fast-math"]
        ext_modules = cythonize(
            [
                Extension(
                    "forestdriver._ext",
                    ["src/forestdriver/_ext.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=cc_flags,
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )

setup(ext_modules=ext_modules)
