"""Backend selection for the solver hot loop.

The compiled extension is used when importable. Setting the environment
variable ``IRSNOMA_PURE_PYTHON=1`` before import forces the numpy fallback.
"""

import os

from . import _apg_py

BACKEND = "python"
apg = _apg_py.apg

if os.environ.get("IRSNOMA_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _apg_ext
    except ImportError:  # extension not built
        pass
    else:
        apg = _apg_ext.apg
        BACKEND = "cython"

project_disk = _apg_py.project_disk

__all__ = ["apg", "project_disk", "BACKEND"]
