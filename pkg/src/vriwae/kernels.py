"""Backend selection for the hot reduction kernels.

Prefers the compiled Cython extension when it importable, falling back to the
NumPy implementations otherwise. ``VRIWAE_KERNELS=py`` or ``=cy`` in the
environment forces a backend (the latter raises if the extension is absent).
Within a process the choice is fixed at import time, so repeated runs are
reproducible.
"""

from __future__ import annotations

import os

from . import _kernels_py

_forced = os.environ.get("VRIWAE_KERNELS", "").strip().lower()

if _forced in ("py", "numpy", "python"):
    _impl = _kernels_py
    BACKEND = "numpy"
elif _forced in ("cy", "cython", "compiled"):
    from . import _kernels_cy as _impl  # noqa: F401

    BACKEND = "cython"
else:
    try:
        from . import _kernels_cy as _impl  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        _impl = _kernels_py
        BACKEND = "numpy"

rep_estimates = _impl.rep_estimates
drep_estimates = _impl.drep_estimates
bound_estimates = _impl.bound_estimates
softmax_stats = _impl.softmax_stats

__all__ = [
    "BACKEND",
    "rep_estimates",
    "drep_estimates",
    "bound_estimates",
    "softmax_stats",
]
