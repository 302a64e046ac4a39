"""Build the optional compiled kernels.

The package imports and runs without them; see ``accuracy_curriculum.kernels``.
"""
import os

from setuptools import Extension, setup

ext_modules = []
if os.environ.get("ACCURACY_CURRICULUM_NO_EXT") != "1":
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "accuracy_curriculum._ckernels",
                ["src/accuracy_curriculum/_ckernels.pyx"],
                extra_compile_args=["-O3", "-fno-math-errno"],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
