"""Kernel backend selection.

The compiled Cython kernels are preferred when the extension built; the
pure NumPy twin is the fallback. MARLPERF_NUMERICS=pure|compiled forces
a choice (compiled errors out if the extension is missing), anything
else or unset means auto.
"""

import os

from . import _pure

try:
    from . import _kernels
except ImportError:
    _kernels = None

_choice = os.environ.get("MARLPERF_NUMERICS", "auto").lower()
if _choice == "pure":
    impl = _pure
elif _choice == "compiled":
    if _kernels is None:
        raise ImportError(
            "MARLPERF_NUMERICS=compiled but the _kernels extension is not built"
        )
    impl = _kernels
else:
    impl = _kernels if _kernels is not None else _pure

BACKEND_NAME = "compiled" if impl is not None and impl is _kernels else "pure"
HAVE_COMPILED = _kernels is not None


def get_backend(name):
    """Return a kernel module by name, for side-by-side benchmarking."""
    if name == "pure":
        return _pure
    if name == "compiled":
        if _kernels is None:
            raise ImportError("compiled kernels are not built")
        return _kernels
    raise ValueError(f"unknown backend {name!r}")
