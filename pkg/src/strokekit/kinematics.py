"""Stroke velocity, direction, duration and uniformity from envelopes."""
from __future__ import annotations

import numpy as np

from .errors import FlatChannelError, ZeroTimeSpreadError
from .model import ChannelLayout, Envelope, StrokeKinematics


def detect_peaks(env: Envelope, strict: bool = True) -> list[tuple[float, float]]:
    """Global envelope maximum per channel as (peak_time, peak_value).

    Peak time uses the window-center convention (window start plus half the
    window length); ties resolve to the earliest sample. A channel whose
    envelope is identically zero never saw contact: with ``strict`` this
    raises ``FlatChannelError``, otherwise a zero-valued peak is returned.
    """
    peaks = []
    for ch in range(env.n_channels):
        series = env.per_channel[ch]
        idx = int(np.argmax(series))
        value = float(series[idx])
        if value == 0.0 and strict:
            raise FlatChannelError(f"channel {ch} envelope is identically zero")
        peaks.append((idx / env.sample_rate + env.window_len / 2, value))
    return peaks


def estimate_kinematics(peaks, layout: ChannelLayout) -> StrokeKinematics:
    """Least-squares stroke estimate from per-channel peak times.

    Peak time is regressed on channel position; velocity is the inverse
    slope, signed (positive = toward increasing positions). Duration is the
    time between the first and last channel's peaks, reported positive.
    Uniformity is the coefficient of variation of the adjacent-channel
    segment velocities. Non-monotonic peak orderings are flagged as a
    warning, not an error.
    """
    times = np.asarray([t for t, _ in peaks], dtype=np.float64)
    pos = np.asarray(layout.positions, dtype=np.float64)
    if times.size != pos.size:
        raise ValueError("need one peak per layout channel")
    if times.size < 2:
        raise ValueError("need at least 2 channels")

    pc = pos - pos.mean()
    tc = times - times.mean()
    slope = float((pc @ tc) / (pc @ pc))  # seconds per meter
    duration = float(abs(times[-1] - times[0]))
    if slope == 0.0 or duration == 0.0:
        raise ZeroTimeSpreadError("channel peaks are simultaneous; velocity undefined")

    ss_tot = float(tc @ tc)
    ss_res = float(((tc - slope * pc) ** 2).sum())
    r_squared = 1.0 - ss_res / ss_tot if ss_tot > 0 else 0.0
    r_squared = min(max(r_squared, 0.0), 1.0)

    warnings = []
    dt = np.diff(times)
    if not ((dt > 0).all() or (dt < 0).all()):
        warnings.append("non-monotonic peak times: invalid or multi-pass stroke")

    with np.errstate(divide="ignore"):
        seg_v = np.diff(pos) / dt
    seg_mean = seg_v.mean()
    uniformity = float(seg_v.std() / abs(seg_mean)) if seg_mean != 0 else float("inf")

    return StrokeKinematics(
        velocity=1.0 / slope,
        peak_times=tuple(times),
        duration=duration,
        r_squared=r_squared,
        uniformity=uniformity,
        warnings=tuple(warnings),
    )


def stroke_duration_per_channel(env: Envelope, threshold_fraction: float = 0.1) -> np.ndarray:
    """Per-channel contact duration in seconds.

    Duration of the longest contiguous run where the channel envelope exceeds
    ``threshold_fraction`` times its own peak.
    """
    if not 0.0 <= threshold_fraction < 1.0:
        raise ValueError("threshold_fraction must lie in [0, 1)")
    out = np.empty(env.n_channels)
    for ch in range(env.n_channels):
        series = env.per_channel[ch]
        peak = float(series.max())
        if peak == 0.0:
            raise FlatChannelError(f"channel {ch} envelope is identically zero")
        above = series > threshold_fraction * peak
        out[ch] = _longest_run(above) / env.sample_rate
    return out


def _longest_run(mask: np.ndarray) -> int:
    best = run = 0
    for v in mask:
        run = run + 1 if v else 0
        if run > best:
            best = run
    return best
