import os
import platform

import numpy as np
from setuptools import Extension, setup

# No -march=native / -ffast-math: FMA contraction or reassociation would break
# bitwise parity with the pure-Python kernel.
COMPILE_ARGS = ["-O3", "-fno-fast-math", "-ffp-contract=off"]


def _simd_args():
    """AVX2 for the lane kernel when the build host has it.

    TOPPMPC_SIMD=none|avx2 overrides detection. The resulting extension only
    runs on CPUs with the selected instruction set.
    """
    choice = os.environ.get("TOPPMPC_SIMD", "auto")
    if choice == "auto":
        choice = "none"
        if platform.machine() in ("x86_64", "AMD64"):
            try:
                with open("/proc/cpuinfo") as fh:
                    if " avx2" in fh.read():
                        choice = "avx2"
            except OSError:
                pass
    return ["-mavx2"] if choice == "avx2" else []


ext_modules = []
if os.environ.get("TOPPMPC_NO_EXT") != "1":
    from Cython.Build import cythonize

    ext_modules = cythonize(
        [
            Extension(
                "toppmpc._kernel",
                ["src/toppmpc/_kernel.pyx"],
                depends=["src/toppmpc/rk4_lanes.h"],
                include_dirs=[np.get_include()],
                extra_compile_args=COMPILE_ARGS + _simd_args(),
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
            )
        ],
        compiler_directives={"language_level": "3"},
    )

setup(ext_modules=ext_modules)
