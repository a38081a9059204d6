import numpy
from Cython.Build import cythonize
from setuptools import Extension, setup

# -ffp-contract=off keeps the compiled kernel bit-identical to the pure
# Python fallback (no FMA contraction of a*b+c).
ext = Extension(
    "milestoning._kernel._core",
    sources=["src/milestoning/_kernel/_core.pyx"],
    include_dirs=[numpy.get_include()],
    extra_compile_args=["-O3", "-ffp-contract=off"],
)

setup(ext_modules=cythonize([ext], language_level=3))
