"""Hot training loops, compiled when available.

The Cython extension ``_tabular_core`` is used when it has been built;
otherwise the numpy implementation in ``_tabular_py`` is loaded. Setting
``IVELAB_PURE_PYTHON=1`` forces the fallback.
"""

import os

from . import _tabular_py

if os.environ.get("IVELAB_PURE_PYTHON", "") not in ("", "0"):
    _impl = _tabular_py
    BACKEND = "python"
else:
    try:
        from . import _tabular_core as _impl

        BACKEND = "cython"
    except ImportError:
        _impl = _tabular_py
        BACKEND = "python"

mle_steps = _impl.mle_steps
sarsa_steps = _impl.sarsa_steps

__all__ = ["BACKEND", "mle_steps", "sarsa_steps", "_tabular_py"]
