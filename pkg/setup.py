"""Builds the optional Cython kernels; the package falls back to numpy without them."""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("TWINBOOT_NO_EXT") != "1":
    try:
        import os.path

        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "twinboot._ckernels",
                    ["src/twinboot/_ckernels.pyx"],
                    include_dirs=[np.get_include()],
                    library_dirs=[os.path.join(os.path.dirname(np.__file__), "random", "lib")],
                    libraries=["npyrandom", "m"],
                    extra_compile_args=["-O3"],
                    define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                )
            ],
            compiler_directives={"language_level": "3"},
        )
    except ImportError:
        ext_modules = []

setup(ext_modules=ext_modules)
