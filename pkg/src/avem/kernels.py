"""Backend selection for the batched element kernels.

The compiled extension is used when it was built; otherwise the numpy
implementation is used. ``AVEM_KERNELS=python`` forces the fallback.
"""
import os

from . import _kernels_py

BACKEND = "python"
element_kernels = _kernels_py.element_kernels

if os.environ.get("AVEM_KERNELS", "").lower() != "python":
    try:
        from . import _ckernels
    except ImportError:  # extension not built
        pass
    else:
        element_kernels = _ckernels.element_kernels
        BACKEND = "cython"

__all__ = ["BACKEND", "element_kernels"]
