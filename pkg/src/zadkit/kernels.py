"""Kernel backend selection.

Prefers the compiled extension; falls back to the numpy implementations
when it is missing or when ``ZADKIT_NO_EXT`` is set (useful for the
backend-equivalence tests and the benchmark).
"""

import os

if os.environ.get("ZADKIT_NO_EXT"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl
    except ImportError:
        from . import _kernels_py as _impl

BACKEND = _impl.BACKEND
prefix_sum = _impl.prefix_sum
moving_average = _impl.moving_average
minmax_normalize = _impl.minmax_normalize
runs_above = _impl.runs_above
inflation_length = _impl.inflation_length
batch_segment_scores = _impl.batch_segment_scores
