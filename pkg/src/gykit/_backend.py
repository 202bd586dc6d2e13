"""Select the compiled quadrature kernel, falling back to numpy.

Set GYKIT_PURE_PYTHON=1 to force the fallback.
"""
import os

from . import _quad_py

BACKEND = "python"
scaled_integral_batch = _quad_py.scaled_integral_batch

if os.environ.get("GYKIT_PURE_PYTHON") != "1":
    try:
        from ._ext import yorquad as _compiled
    except ImportError:  # pragma: no cover - depends on the build
        pass
    else:
        BACKEND = "cython"
        scaled_integral_batch = _compiled.scaled_integral_batch
