"""Backend selection for the epoch kernel.

The compiled extension is used when it was built; setting the environment
variable ``COMPADMM_PURE_PYTHON=1`` before import forces the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
epoch_inner_loop = _kernels_py.epoch_inner_loop

if not os.environ.get("COMPADMM_PURE_PYTHON"):
    try:
        from ._kernels import epoch_inner_loop  # noqa: F401,F811
    except ImportError:
        pass
    else:
        BACKEND = "compiled"

python_epoch_inner_loop = _kernels_py.epoch_inner_loop


def compiled_epoch_inner_loop():
    """The compiled kernel, or None when the extension is unavailable."""
    try:
        from ._kernels import epoch_inner_loop as fn
    except ImportError:
        return None
    return fn
