"""Build script for the optional compiled tokenizer core.

The package works without the extension: _backend falls back to the pure
numpy implementation when the compiled module is absent or when
REPUNCT_PURE=1 is set in the environment.
"""

from setuptools import Extension, setup

try:
    from Cython.Build import cythonize
    import numpy as np

    extensions = cythonize(
        [
            Extension(
                "repunct._ctokenize",
                ["src/repunct/_ctokenize.pyx"],
                include_dirs=[np.get_include()],
                define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")],
                optional=True,
            )
        ],
        language_level=3,
    )
except ImportError:
    extensions = []

setup(ext_modules=extensions)
