"""Kernel selector: compiled extension when available, else pure Python.

Set ``PROXSUM_PURE_PYTHON=1`` to force the fallback.
"""
import os

from . import _pykernels

BACKEND = "python"
if os.environ.get("PROXSUM_PURE_PYTHON") != "1":
    try:
        from . import _ckernels as _impl

        BACKEND = "compiled"
    except ImportError:
        _impl = _pykernels
else:
    _impl = _pykernels

chain_tv_prox = _impl.chain_tv_prox
tridiag_solve = _impl.tridiag_solve
mgs_orthogonalize = _impl.mgs_orthogonalize

__all__ = ["BACKEND", "chain_tv_prox", "tridiag_solve", "mgs_orthogonalize"]
