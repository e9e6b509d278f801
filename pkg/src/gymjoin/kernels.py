"""Backend selection for the relational hot loops.

The compiled module is used when it imports cleanly; set ``GYMJOIN_PURE=1``
to force the pure-Python fallback. ``BACKEND`` names the active one.
"""
import os

from gymjoin import _kernels_py

if os.environ.get("GYMJOIN_PURE") == "1":
    _impl = _kernels_py
else:
    try:
        from gymjoin import _ckernels as _impl
    except ImportError:
        _impl = _kernels_py

BACKEND = "cython" if _impl is not _kernels_py else "python"

row_hash = _impl.row_hash
bucket_rows = _impl.bucket_rows
project = _impl.project
hash_join = _impl.hash_join
semijoin = _impl.semijoin


def backends():
    """Return every importable backend module, keyed by name."""
    found = {"python": _kernels_py}
    try:
        from gymjoin import _ckernels
    except ImportError:
        pass
    else:
        found["cython"] = _ckernels
    return found
