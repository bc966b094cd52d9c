"""Builds the _msrag pybind11 extension by driving the repository's CMake.

The CMake build stages the module under <build>/python_pkg/msrag/; this
build_ext copies it to wherever setuptools expects the extension (site
packages for wheels, the editable hook directory for `pip install -e .`).
Use `pip install -e . --no-build-isolation` so the preinstalled toolchain is
reused.
"""

import os
import shutil
import subprocess
import sys
from pathlib import Path

from setuptools import Extension, setup
from setuptools.command.build_ext import build_ext


class CMakeExtension(Extension):
    def __init__(self, name: str):
        super().__init__(name, sources=[])


class CMakeBuild(build_ext):
    def build_extension(self, ext: CMakeExtension) -> None:
        source_dir = Path(__file__).parent.resolve()
        build_dir = Path(self.build_temp).resolve() / "cmake"
        build_dir.mkdir(parents=True, exist_ok=True)
        subprocess.run(
            [
                "cmake",
                "-S", str(source_dir),
                "-B", str(build_dir),
                "-DCMAKE_BUILD_TYPE=Release",
                "-DMSRAG_BUILD_TESTS=OFF",
                "-DMSRAG_BUILD_PYTHON=ON",
                f"-DPython3_EXECUTABLE={sys.executable}",
            ],
            check=True,
        )
        subprocess.run(
            [
                "cmake",
                "--build", str(build_dir),
                "--target", "_msrag",
                f"-j{os.cpu_count() or 2}",
            ],
            check=True,
        )
        built = sorted((build_dir / "python_pkg" / "msrag").glob("_msrag*"))
        if not built:
            raise RuntimeError("cmake did not produce the _msrag extension")
        target = Path(self.get_ext_fullpath(ext.name))
        target.parent.mkdir(parents=True, exist_ok=True)
        shutil.copy2(built[0], target)


setup(
    ext_modules=[CMakeExtension("msrag._msrag")],
    cmdclass={"build_ext": CMakeBuild},
)
