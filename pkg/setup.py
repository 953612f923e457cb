from setuptools import Extension, setup

# The compiled kernel is optional: without Cython (or a compiler) the
# package falls back to the pure-Python kernel at import time.
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("evd._fastkernel", ["src/evd/_fastkernel.pyx"])],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    ext_modules = []

setup(ext_modules=ext_modules)
