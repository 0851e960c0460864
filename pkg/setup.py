import os

from setuptools import Extension, setup

# The compiled convolution kernels are optional: the package falls back to
# the numpy implementation when the extension is absent (see rfrlkit.backend).
# Set RFRLKIT_PURE=1 to skip the extension build entirely.
ext_modules = []
if not os.environ.get("RFRLKIT_PURE"):
    try:
        import numpy
        from Cython.Build import cythonize

        ext_modules = cythonize(
            [
                Extension(
                    "rfrlkit._convkernels",
                    ["src/rfrlkit/_convkernels.pyx"],
                    include_dirs=[numpy.get_include()],
                    extra_compile_args=["-O3"],
                )
            ],
            language_level="3",
        )
    except Exception as exc:  # pragma: no cover
        print(f"rfrlkit: building without compiled kernels ({exc})")

setup(ext_modules=ext_modules)
