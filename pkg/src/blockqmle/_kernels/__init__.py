"""Numeric kernel backend selection.

The compiled Cython core is preferred when the extension built; otherwise
the NumPy/SciPy implementation with the same interface is used.  Set the
environment variable ``BLOCKQMLE_BACKEND=pure`` to force the fallback
(useful for benchmarking and parity testing).
"""

import os

from . import _pure

if os.environ.get("BLOCKQMLE_BACKEND", "").lower() == "pure":
    _impl = _pure
else:
    try:
        from . import _core as _impl
    except ImportError:
        _impl = _pure

BACKEND = _impl.BACKEND
interval_overlaps = _impl.interval_overlaps
quad_logdet = _impl.quad_logdet
grad_terms = _impl.grad_terms
batch_quad_logdet = _impl.batch_quad_logdet
cir_euler = _impl.cir_euler


def get_backend(name=None):
    """Return a kernel module by name ('core', 'pure', or None for active)."""
    if name is None:
        return _impl
    if name == "pure":
        return _pure
    if name == "core":
        from . import _core

        return _core
    raise ValueError(f"unknown backend {name!r}")
