"""Build script: compiles the optional sampling kernel extension.

The extension (`cas_toolkit._kernels`) accelerates the sequential RNG and
draw loops.  If Cython or a C compiler is unavailable the build falls back
to a pure-Python install; `cas_toolkit.rng` selects the backend at import.
"""

from setuptools import setup
from setuptools.command.build_ext import build_ext


class optional_build_ext(build_ext):
    """Build the extension if possible, otherwise install pure-Python."""

    def run(self):
        try:
            super().run()
        except Exception as exc:  # compiler missing, etc.
            print(f"warning: extension build skipped ({exc}); using pure-Python kernels")

    def build_extension(self, ext):
        try:
            super().build_extension(ext)
        except Exception as exc:
            print(f"warning: building {ext.name} failed ({exc}); using pure-Python kernels")


def extensions():
    try:
        from Cython.Build import cythonize
    except ImportError:
        return []
    return cythonize(
        ["src/cas_toolkit/_kernels.pyx"],
        language_level=3,
    )


setup(
    ext_modules=extensions(),
    cmdclass={"build_ext": optional_build_ext},
)
