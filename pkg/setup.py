import warnings

from setuptools import setup

ext_modules = []
cmdclass = {}
try:
    import numpy
    from Cython.Build import cythonize
    from setuptools import Extension

    ext_modules = cythonize(
        [
            Extension(
                "seqscreen._kernels._cd",
                ["src/seqscreen/_kernels/_cd.pyx"],
                include_dirs=[numpy.get_include()],
                extra_compile_args=["-O3"],
            )
        ],
        compiler_directives={
            "language_level": "3",
            "boundscheck": False,
            "wraparound": False,
            "cdivision": True,
        },
    )
except ImportError:
    warnings.warn(
        "Cython or numpy unavailable at build time; "
        "installing with the pure-Python kernel only."
    )

setup(ext_modules=ext_modules, cmdclass=cmdclass, zip_safe=False)
