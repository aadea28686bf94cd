"""Kernel selection.

The compiled extension is used when it imports; otherwise, or when
``SENTISTOCK_PURE_PYTHON=1`` is set, the numpy implementations are used.
``use(name)`` switches at runtime (tests and the benchmark rely on it).
"""

import logging
import os

from . import _pykernels

log = logging.getLogger(__name__)

KERNELS = (
    "gru_sequence_forward",
    "gru_sequence_backward",
    "lstm_sequence_forward",
    "lstm_sequence_backward",
    "css_residuals",
)

try:
    from . import _ckernels
except ImportError:  # extension not built
    _ckernels = None

name = None


def available():
    return ["python"] + (["cython"] if _ckernels is not None else [])


def use(which):
    """Bind the module-level kernel names to the ``which`` backend."""
    global name
    if which == "cython" and _ckernels is None:
        raise ImportError("compiled kernels are not built; run "
                          "`pip install -e . --no-build-isolation`")
    src = _ckernels if which == "cython" else _pykernels
    for k in KERNELS:
        globals()[k] = getattr(src, k, getattr(_pykernels, k))
    name = which


if _ckernels is not None and os.environ.get("SENTISTOCK_PURE_PYTHON", "") not in ("1", "true"):
    use("cython")
else:
    use("python")
log.debug("kernel backend: %s", name)
