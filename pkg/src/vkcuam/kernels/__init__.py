"""Hot-kernel backend selection.

The compiled Cython extension is used when it built successfully; the pure
numpy module is the fallback and the reference semantics. Setting the
environment variable VKCUAM_PURE_PYTHON=1 forces the fallback, which is
handy for debugging and for the backend-equivalence tests.
"""

from __future__ import annotations

import os

from . import pure

if os.environ.get("VKCUAM_PURE_PYTHON", "") not in ("", "0"):
    _impl = pure
else:
    try:
        from . import _fastchain as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = pure

BACKEND: str = _impl.BACKEND
fk_all = _impl.fk_all
rne = _impl.rne
mass_matrix = _impl.mass_matrix
seg_box_sd = getattr(_impl, "seg_box_sd", pure.seg_box_sd)

REVOLUTE = pure.REVOLUTE
PRISMATIC = pure.PRISMATIC
FIXED = pure.FIXED


def backends() -> dict:
    """All importable backends by name, for tests and benchmarks."""
    out = {"pure": pure}
    try:
        from . import _fastchain

        out["compiled"] = _fastchain
    except ImportError:
        pass
    return out
