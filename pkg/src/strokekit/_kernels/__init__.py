"""Numeric kernels: compiled fast path with a NumPy fallback.

The compiled extension implements the sliding RMS and the sliding-window
power spectra (a radix-2 transform in C); ``_ref`` provides the same
contracts in NumPy. Set ``STROKEKIT_PURE_PYTHON=1`` to force the fallback,
e.g. for benchmarking one backend against the other.
"""
import os

from . import _ref

if os.environ.get("STROKEKIT_PURE_PYTHON"):
    _impl = _ref
else:
    try:
        from . import _fast as _impl  # type: ignore[no-redef]
    except ImportError:
        _impl = _ref

BACKEND: str = _impl.NAME
sliding_rms = _impl.sliding_rms
psd_frames = _impl.psd_frames


def available_backends():
    """Name -> module for every backend importable in this environment."""
    backends = {_ref.NAME: _ref}
    try:
        from . import _fast
        backends[_fast.NAME] = _fast
    except ImportError:
        pass
    return backends
