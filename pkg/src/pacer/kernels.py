"""Kernel selection.

The compiled extension is used when it imports; otherwise the pure-Python
module. Set ``PACER_PURE_PYTHON=1`` to force the fallback.
"""
import os

if os.environ.get("PACER_PURE_PYTHON"):
    from . import _kernels_py as _impl
else:
    try:
        from . import _kernels as _impl
    except ImportError:  # extension not built
        from . import _kernels_py as _impl

IMPLEMENTATION = _impl.IMPLEMENTATION
StabilityCore = _impl.StabilityCore
topk_uncertainty = _impl.topk_uncertainty
uncertainty_rows = _impl.uncertainty_rows
stability_trajectory = _impl.stability_trajectory
weighted_vote_errors = _impl.weighted_vote_errors

__all__ = [
    "IMPLEMENTATION",
    "StabilityCore",
    "topk_uncertainty",
    "uncertainty_rows",
    "stability_trajectory",
    "weighted_vote_errors",
]
