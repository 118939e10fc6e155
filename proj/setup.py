"""Builds the dsscan extension module directly from the C++ sources.

The CMake build remains the primary entry point (CLI, tests, in-tree
module); this exists so `pip install .` produces a wheel without CMake.
"""

import glob
import os
import subprocess

from pybind11.setup_helpers import Pybind11Extension, build_ext
from setuptools import setup


def eigen_include() -> str:
    try:
        out = subprocess.run(
            ["pkg-config", "--cflags-only-I", "eigen3"],
            capture_output=True,
            text=True,
            check=True,
        ).stdout
        for token in out.split():
            if token.startswith("-I"):
                return token[2:]
    except (OSError, subprocess.CalledProcessError):
        pass
    for candidate in ("/usr/include/eigen3", "/usr/local/include/eigen3"):
        if os.path.isdir(candidate):
            return candidate
    raise RuntimeError("Eigen3 headers not found (install libeigen3-dev)")


ext = Pybind11Extension(
    "dsscan",
    sorted(glob.glob("src/*.cpp")) + ["python/dsscan_py.cpp"],
    include_dirs=["include", eigen_include()],
    cxx_std=20,
)

setup(ext_modules=[ext], cmdclass={"build_ext": build_ext})
