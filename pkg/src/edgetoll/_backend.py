"""Kernel selection: the compiled ``_core`` extension when importable, else
the pure-Python fallback.  Set ``EDGETOLL_PURE_PYTHON=1`` to force the
fallback.
"""

import os

if os.environ.get("EDGETOLL_PURE_PYTHON", "") not in ("", "0"):
    from edgetoll import _purepy as impl
else:
    try:
        from edgetoll import _core as impl
    except ImportError:  # extension not built
        from edgetoll import _purepy as impl

NATIVE = impl.NATIVE
keccak256 = impl.keccak256
base_mul = impl.base_mul
point_mul = impl.point_mul
mul_add = impl.mul_add
lift_x = impl.lift_x
PointTable = impl.PointTable

__all__ = ["NATIVE", "keccak256", "base_mul", "point_mul", "mul_add", "lift_x", "PointTable"]
