"""Hot kernels: compiled extension when available, numpy otherwise.

Set ``DGREC_PURE_PYTHON=1`` to force the numpy path. ``BACKEND`` names the
active implementation; both modules are importable for side-by-side checks.
"""

import os

from . import _pykernels as py

BACKEND = "python"
native = None

if os.environ.get("DGREC_PURE_PYTHON", "") not in ("1", "true", "yes"):
    try:
        from . import _ckernels as native  # type: ignore[no-redef]

        BACKEND = "cython"
    except ImportError:
        native = None

_impl = native if native is not None else py

lstm_cell_forward = _impl.lstm_cell_forward
lstm_cell_backward = _impl.lstm_cell_backward
attend_forward = _impl.attend_forward
attend_backward = _impl.attend_backward
xent_forward = _impl.xent_forward
xent_backward = _impl.xent_backward
scatter_add_rows = _impl.scatter_add_rows

__all__ = [
    "BACKEND",
    "attend_backward",
    "attend_forward",
    "lstm_cell_backward",
    "lstm_cell_forward",
    "native",
    "py",
    "scatter_add_rows",
    "xent_backward",
    "xent_forward",
]
