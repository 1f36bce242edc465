"""Build the optional compiled kernels; the package works without them."""

import os

from setuptools import setup

ext_modules = []
if os.environ.get("RTFLOOD_NO_EXT") != "1":
    try:
        import numpy
        from Cython.Build import cythonize
        from setuptools import Extension
    except ImportError:
        pass
    else:
        ext_modules = cythonize(
            [
                Extension("rtflood.sim._simcore", ["src/rtflood/sim/_simcore.pyx"],
                          include_dirs=[numpy.get_include()],
                          define_macros=[("NPY_NO_DEPRECATED_API", "NPY_1_7_API_VERSION")]),
                Extension("rtflood.rtagent._cycleloop", ["src/rtflood/rtagent/_cycleloop.pyx"]),
            ],
            language_level=3,
        )

setup(ext_modules=ext_modules)
