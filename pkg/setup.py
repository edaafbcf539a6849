from setuptools import Extension, setup

try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [Extension("ionroute._kernels._cy", ["src/ionroute/_kernels/_cy.pyx"])],
        language_level="3",
    )
except ImportError:
    # No Cython: the package still works through the pure-Python kernels.
    ext_modules = []

setup(ext_modules=ext_modules)
