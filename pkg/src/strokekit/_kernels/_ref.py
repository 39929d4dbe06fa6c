"""NumPy implementation of the hot kernels.

Same contracts as the compiled module ``_fast``; selected at import time when
the extension is unavailable or ``STROKEKIT_PURE_PYTHON`` is set. Callers
validate arguments (lengths, power-of-two transform size) before dispatching.
"""
from __future__ import annotations

import numpy as np

NAME = "numpy"


def sliding_rms(x: np.ndarray, window: int, hop: int) -> np.ndarray:
    """RMS over length-``window`` windows starting every ``hop`` samples."""
    x = np.ascontiguousarray(x, dtype=np.float64)
    n_out = (x.size - window) // hop + 1
    csum = np.empty(x.size + 1)
    csum[0] = 0.0
    np.cumsum(x * x, out=csum[1:])
    idx = np.arange(n_out) * hop
    return np.sqrt((csum[idx + window] - csum[idx]) / window)


def psd_frames(
    x: np.ndarray, weights: np.ndarray, hop: int, n_keep: int, scale: float
) -> np.ndarray:
    """One-sided PSD of each windowed frame, first ``n_keep`` bins.

    ``scale`` must be ``1 / (sample_rate * sum(weights**2))``; interior bins
    (0 < k < n_fft/2) are doubled so the one-sided density integrates to the
    frame's mean square over the full band.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    n_fft = weights.size
    frames = np.lib.stride_tricks.sliding_window_view(x, n_fft)[::hop] * weights
    spec = np.fft.rfft(frames, axis=1)
    psd = (spec.real**2 + spec.imag**2) * scale
    psd[:, 1 : n_fft // 2] *= 2.0
    return np.ascontiguousarray(psd[:, :n_keep])
