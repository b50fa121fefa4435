"""Dense optical flow between ROI patches and motion-stream input conditioning.

The polynomial-expansion kernels come from the compiled ``_kernels``
extension when it is importable, otherwise from the numpy fallback in
``_kernels_py``. Set ``MANEUVER_NET_PURE_PYTHON=1`` to force the fallback.
"""

import os

if os.environ.get("MANEUVER_NET_PURE_PYTHON"):
    from . import _kernels_py as kernels

    BACKEND = "python"
else:
    try:
        from . import _kernels as kernels

        BACKEND = "cython"
    except ImportError:  # extension not built
        from . import _kernels_py as kernels

        BACKEND = "python"

from .farneback import (  # noqa: E402
    FlowParams,
    dense_flow,
    farneback_flow,
    flow_sequence,
    flow_to_input,
)

__all__ = [
    "BACKEND",
    "FlowParams",
    "dense_flow",
    "farneback_flow",
    "flow_sequence",
    "flow_to_input",
    "kernels",
]
