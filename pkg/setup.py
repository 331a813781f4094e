"""Build the optional compiled MCMC kernel.

The extension is optional: if Cython or a C compiler is unavailable the
package installs without it and falls back to the pure-Python kernel.
"""
import os

from setuptools import setup

ext_modules = []
if os.environ.get("BISGSAMP_NO_EXT") != "1":
    try:
        import numpy as np
        from Cython.Build import cythonize
        from setuptools import Extension

        ext_modules = cythonize(
            [
                Extension(
                    "bisgsamp.hiermodel._ckernel",
                    ["src/bisgsamp/hiermodel/_ckernel.pyx"],
                    include_dirs=[np.get_include()],
                    extra_compile_args=["-O3"],
                    optional=True,
                )
            ],
            compiler_directives={
                "language_level": "3",
                "boundscheck": False,
                "wraparound": False,
                "cdivision": True,
            },
        )
    except Exception as exc:  # pragma: no cover - build environment dependent
        print(f"bisgsamp: building without compiled kernel ({exc})")
        ext_modules = []

setup(ext_modules=ext_modules)
