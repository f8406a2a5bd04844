"""Build the optional compiled kernel extension.

The package is fully functional without it (a numpy fallback is selected
at import time); building the extension speeds up the optical-flow and
LBP inner loops considerably.  Compare both with
``python benchmarks/bench_kernels.py``.
"""

from setuptools import Extension, setup
from Cython.Build import cythonize

extensions = [
    Extension(
        name="biwoof._kernels._native",
        sources=["src/biwoof/_kernels/_native.pyx"],
        # -ffp-contract=off keeps the C arithmetic bit-compatible with the
        # numpy fallback (no FMA contraction).
        extra_compile_args=["-O3", "-ffp-contract=off"],
    )
]

setup(ext_modules=cythonize(extensions, language_level="3"))
