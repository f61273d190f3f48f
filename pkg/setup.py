"""Build script. The compiled kernel extension is optional: if Cython or a C
compiler is unavailable the package installs anyway and falls back to the
pure-Python kernels at import time."""

from setuptools import setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        "src/htlip/_speedups.pyx",
        language_level=3,
        compiler_directives={"boundscheck": False, "wraparound": False, "cdivision": True},
    )
    for ext in ext_modules:
        ext.optional = True
except ImportError:
    pass

setup(ext_modules=ext_modules)
