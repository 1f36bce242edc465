"""Deterministic discrete-event simulator of the cyclic task under interference.

The per-core event loop has a compiled implementation (``_simcore``) and a
pure-Python fallback (``_corepy``); the compiled one is used when it imports,
unless ``RTFLOOD_PURE_PYTHON=1`` is set.
"""

import os

from . import _corepy

try:
    from . import _simcore
except ImportError:  # extension not built
    _simcore = None


def get_kernel(name: str | None = None):
    """Return the ``run_core`` implementation: ``"c"``, ``"py"`` or auto."""
    if name is None:
        name = "py" if os.environ.get("RTFLOOD_PURE_PYTHON") == "1" or _simcore is None else "c"
    if name == "c":
        if _simcore is None:
            raise ImportError("compiled simulator kernel is not built")
        return _simcore.run_core
    if name == "py":
        return _corepy.run_core
    raise ValueError(f"unknown kernel {name!r}")


def kernel_name() -> str:
    return "py" if get_kernel() is _corepy.run_core else "c"


from .engine import (CoreInputs, build_cores, cbs_state, report_cpu_breakdown,  # noqa: E402
                     simulate_phase, simulate_phase_detailed)
from .params import ArrivalModel, CbsState, CoreState, SimParams  # noqa: E402

__all__ = [
    "ArrivalModel", "CbsState", "CoreInputs", "CoreState", "SimParams", "build_cores", "cbs_state",
    "get_kernel", "kernel_name", "report_cpu_breakdown", "simulate_phase", "simulate_phase_detailed",
]
