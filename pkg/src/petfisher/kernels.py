"""Backend selection for the hot loops.

The compiled extension is used when importable. Set ``PETFISHER_BACKEND`` to
``python`` to force the NumPy fallback or to ``cython`` to fail loudly when
the extension is missing.
"""
import os

from petfisher import _pykernels

_requested = os.environ.get("PETFISHER_BACKEND", "auto").lower()

try:
    from petfisher import _ckernels
except ImportError:  # extension not built
    _ckernels = None

if _requested not in ("auto", "python", "cython"):
    raise ImportError(f"PETFISHER_BACKEND must be auto, python or cython, got {_requested!r}")
if _requested == "cython" and _ckernels is None:
    raise ImportError("PETFISHER_BACKEND=cython but petfisher._ckernels is not built")

if _requested == "python" or _ckernels is None:
    _impl = _pykernels
    BACKEND = "python"
else:
    _impl = _ckernels
    BACKEND = "cython"

em_iterate = _impl.em_iterate
em_iterate_batch = _impl.em_iterate_batch
fisher_gram = _impl.fisher_gram


def available_backends():
    """Names of the kernel backends importable in this build."""
    return ["cython", "python"] if _ckernels is not None else ["python"]


def get_backend(name):
    """Return the kernel module for ``name`` ("cython" or "python")."""
    if name == "python":
        return _pykernels
    if name == "cython" and _ckernels is not None:
        return _ckernels
    raise ValueError(f"kernel backend {name!r} is not available")
