"""Build script: compiles the simulation kernel when Cython is available.

The kernel source (src/crudesched/engine/core.py) is plain Python written in
Cython "pure Python" mode, so the package works without compilation; the
extension just makes evaluation ~50x faster.
"""
from setuptools import Extension, setup

ext_modules = []
try:
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "crudesched.engine.core",
                ["src/crudesched/engine/core.py"],
                extra_compile_args=["-O3"],
            )
        ],
        language_level=3,
        annotate=False,
    )
except ImportError:
    pass

setup(ext_modules=ext_modules)
