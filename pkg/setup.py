"""Build hooks for the optional compiled kernel core.

The package is fully functional without the extension; the NumPy fallback in
plapsys._kernels.numpy_backend implements the same contracts.  If Cython or a
C compiler is unavailable the install proceeds without _speedups.
"""

from setuptools import Extension, setup

extensions = []
try:
    import numpy
    from Cython.Build import cythonize

    extensions = cythonize(
        [
            Extension(
                "plapsys._kernels._speedups",
                sources=["src/plapsys/_kernels/_speedups.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={
            "language_level": 3,
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
