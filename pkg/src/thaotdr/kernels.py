"""Backend selection for the Monte-Carlo event loop.

The compiled extension is used when it imports; setting
``THAOTDR_PURE_PYTHON=1`` forces the pure-Python twin.
"""

import os

from . import _kernels_py

BACKEND = "python"
run_events = _kernels_py.run_events

if os.environ.get("THAOTDR_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from ._kernels import run_events  # noqa: F811
        BACKEND = "cython"
    except ImportError:  # extension not built
        pass


def get_backend(name=None):
    """Return ``(name, run_events)`` for ``"cython"``, ``"python"`` or the default."""
    if name is None:
        return BACKEND, run_events
    if name == "python":
        return "python", _kernels_py.run_events
    if name == "cython":
        from ._kernels import run_events as compiled
        return "cython", compiled
    raise ValueError(f"unknown kernel backend {name!r}")
