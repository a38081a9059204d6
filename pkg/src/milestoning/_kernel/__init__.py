"""Integration kernel backend selection.

The compiled extension is preferred; the pure-Python twin is the
fallback.  Both implement the same contract bit-for-bit.  Set
MILESTONING_FORCE_PURE=1 to force the fallback (used by the parity tests
and the benchmark).
"""

import os

from . import pure

if os.environ.get("MILESTONING_FORCE_PURE"):
    active = pure
else:
    try:
        from . import _core as active  # type: ignore[no-redef]
    except ImportError:
        active = pure

BACKEND = active.BACKEND

STATUS_RUNNING = pure.STATUS_RUNNING
STATUS_CROSSED = pure.STATUS_CROSSED
STATUS_BLOWUP = pure.STATUS_BLOWUP
STATUS_STEP_TOO_LARGE = pure.STATUS_STEP_TOO_LARGE


def get_backend(name=None):
    """Return a kernel module by name: None/'active', 'pure' or 'cython'."""
    if name in (None, "active"):
        return active
    if name == "pure":
        return pure
    if name == "cython":
        from . import _core

        return _core
    raise ValueError(f"unknown kernel backend {name!r}")
