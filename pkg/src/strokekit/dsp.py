"""Envelope and spectral analyses for stroke recordings.

Two pipelines: detrended sliding RMS envelopes (the per-channel intensity
traces), and aggregated sliding-window power spectra (per-bin mean and
standard deviation over the whole frame population). Plus the alignment step
that resamples envelopes onto a canonical stroke-time axis for comparison.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _kernels
from .errors import EmptyInputError, NonMonotonicPeaksError, TooShortError
from .model import Envelope, Recording, SpectrumStats

#: Envelope analysis window, seconds.
DEFAULT_WINDOW_LEN = 0.2

#: Highest spectral bin retained by default, Hz.
DEFAULT_MAX_FREQ = 500.0

#: Points on the canonical [0, 1] stroke-time axis after alignment.
ALIGN_POINTS = 256


@dataclass(frozen=True)
class FrameSpec:
    """Sliding-window transform settings: size, taper, hop.

    The default 128-sample Kaiser window with unit hop gives one spectrum per
    input sample; ``beta`` trades main-lobe width against sidelobe leakage
    (8.0 puts sidelobes near -58 dB).
    """

    n_fft: int = 128
    window: str = "kaiser"
    beta: float = 8.0
    hop: int = 1

    def __post_init__(self):
        n = int(self.n_fft)
        if n < 8 or n & (n - 1):
            raise ValueError("n_fft must be a power of two >= 8")
        if self.window not in ("kaiser", "rect"):
            raise ValueError(f"unknown window kind {self.window!r}")
        if self.beta < 0:
            raise ValueError("beta must be non-negative")
        if int(self.hop) < 1:
            raise ValueError("hop must be >= 1")
        object.__setattr__(self, "n_fft", n)
        object.__setattr__(self, "hop", int(self.hop))

    def weights(self) -> np.ndarray:
        if self.window == "rect":
            return np.ones(self.n_fft)
        return kaiser_window(self.n_fft, self.beta)


def detrend(series: np.ndarray) -> np.ndarray:
    """Subtract the least-squares line from ``series``."""
    x = np.asarray(series, dtype=np.float64)
    n = x.size
    if n < 2:
        raise TooShortError("detrend needs at least 2 samples")
    t = np.arange(n) - (n - 1) / 2.0
    slope = (t @ x) / (n * (n * n - 1.0) / 12.0)
    return x - x.mean() - slope * t


def axis_magnitude(rec: Recording) -> np.ndarray:
    """Per-channel magnitude series: detrend each axis, then Euclidean norm.

    Returns shape (n_channels, n_samples), all values >= 0.
    """
    out = np.empty((rec.n_channels, rec.n_samples))
    for ch in range(rec.n_channels):
        sq = np.zeros(rec.n_samples)
        for ax in range(3):
            d = detrend(rec.channels[ch, ax])
            sq += d * d
        out[ch] = np.sqrt(sq)
    return out


def rms_envelope(
    series: np.ndarray,
    sample_rate: float,
    window_len: float = DEFAULT_WINDOW_LEN,
    hop: int = 1,
) -> np.ndarray:
    """Sliding-window RMS of one series.

    Output ``k`` covers the window starting at sample ``k * hop``; the result
    has ``floor((len - window) / hop) + 1`` points.
    """
    x = np.asarray(series, dtype=np.float64)
    window = int(round(window_len * sample_rate))
    if window < 1:
        raise ValueError("window must span at least one sample")
    if x.size < window:
        raise TooShortError(
            f"series of {x.size} samples is shorter than the {window}-sample window"
        )
    return _kernels.sliding_rms(np.ascontiguousarray(x), window, int(hop))


def envelope_of_recording(
    rec: Recording, window_len: float = DEFAULT_WINDOW_LEN, hop: int = 1
) -> Envelope:
    """Detrended RMS envelope of every channel of ``rec``."""
    mags = axis_magnitude(rec)
    rows = [rms_envelope(m, rec.sample_rate, window_len, hop) for m in mags]
    return Envelope(
        per_channel=np.stack(rows),
        sample_rate=rec.sample_rate / hop,
        window_len=window_len,
        hop=hop,
    )


def _bessel_i0(x: float) -> float:
    """Modified Bessel function of order zero by its power series.

    Terms are accumulated until one falls below 1e-12 of the running total.
    """
    q = x * x / 4.0
    term = 1.0
    total = 1.0
    k = 0
    while term > 1e-12 * total:
        k += 1
        term *= q / (k * k)
        total += term
    return total


def kaiser_window(n_fft: int, beta: float) -> np.ndarray:
    """Kaiser taper of length ``n_fft``: I0(beta*sqrt(1-r^2))/I0(beta).

    ``r`` runs symmetrically from -1 to 1 across the window, so the weights
    are exactly symmetric; beta = 0 gives the rectangular window.
    """
    if n_fft < 2:
        raise ValueError("window needs at least 2 points")
    denom = _bessel_i0(beta)
    n = np.arange(n_fft)
    r = (2.0 * n - (n_fft - 1)) / (n_fft - 1)
    arg = beta * np.sqrt(1.0 - r * r)
    return np.array([_bessel_i0(a) for a in arg]) / denom


def _n_keep(n_fft: int, sample_rate: float, max_freq: float | None) -> int:
    half = n_fft // 2
    if max_freq is None:
        return half + 1
    return min(int(np.floor(max_freq / (sample_rate / n_fft))), half) + 1


def power_spectrum_frames(
    series: np.ndarray,
    sample_rate: float,
    spec: FrameSpec = FrameSpec(),
    max_freq: float | None = DEFAULT_MAX_FREQ,
) -> tuple[np.ndarray, np.ndarray]:
    """One-sided PSD of every sliding window of ``series``.

    Returns ``(psd, bin_freqs)`` with psd shaped (n_frames, n_bins). Each
    frame is tapered, transformed, and normalized by ``sample_rate * sum(w^2)``
    with interior bins doubled, so summing ``psd * bin_width`` over the full
    one-sided band (``max_freq=None``) equals the windowed frame's mean square
    times ``n_fft / sum(w^2)``. By default only bins up to 500 Hz are kept.
    """
    x = np.asarray(series, dtype=np.float64)
    if x.size < spec.n_fft:
        raise TooShortError(
            f"series of {x.size} samples is shorter than n_fft={spec.n_fft}"
        )
    w = spec.weights()
    scale = 1.0 / (sample_rate * float(w @ w))
    keep = _n_keep(spec.n_fft, sample_rate, max_freq)
    psd = _kernels.psd_frames(np.ascontiguousarray(x), w, spec.hop, keep, scale)
    freqs = np.arange(keep) * (sample_rate / spec.n_fft)
    return psd, freqs


def frame_count(n_samples: int, spec: FrameSpec) -> int:
    """Number of sliding windows a series of ``n_samples`` yields."""
    return (n_samples - spec.n_fft) // spec.hop + 1


def aggregate_spectra(
    recordings,
    spec: FrameSpec = FrameSpec(),
    max_freq: float | None = DEFAULT_MAX_FREQ,
) -> SpectrumStats:
    """Population mean/std of the PSD over every channel-frame of every recording.

    Each raw axis series is transformed frame by frame and the three per-axis
    densities of a channel are summed (energy adds across orthogonal axes), so
    each channel-frame contributes one spectrum. No detrending is applied
    here; a constant offset only shows up in the DC bin and its window
    sidelobes. The statistics are population (not sample) moments, accumulated
    by a stable streaming merge in input order; ``frame_count`` records the
    population size.
    """
    recs = list(recordings)
    if not recs:
        raise EmptyInputError("aggregate_spectra needs at least one recording")
    rate = recs[0].sample_rate
    w = spec.weights()
    scale = 1.0 / (rate * float(w @ w))
    keep = _n_keep(spec.n_fft, rate, max_freq)

    count = 0
    mean = np.zeros(keep)
    m2 = np.zeros(keep)
    for rec in recs:
        if rec.sample_rate != rate:
            raise ValueError("all recordings must share one sample rate")
        if rec.n_samples < spec.n_fft:
            raise TooShortError(
                f"recording of {rec.n_samples} samples is shorter than n_fft={spec.n_fft}"
            )
        for ch in range(rec.n_channels):
            psd = None
            for ax in range(3):
                series = np.ascontiguousarray(rec.channels[ch, ax])
                p = _kernels.psd_frames(series, w, spec.hop, keep, scale)
                psd = p if psd is None else psd + p
            n_new = psd.shape[0]
            batch_mean = psd.mean(axis=0)
            batch_m2 = ((psd - batch_mean) ** 2).sum(axis=0)
            delta = batch_mean - mean
            total = count + n_new
            mean = mean + delta * (n_new / total)
            m2 = m2 + batch_m2 + delta * delta * (count * n_new / total)
            count = total

    freqs = np.arange(keep) * (rate / spec.n_fft)
    return SpectrumStats(
        bin_freqs=freqs, mean=mean, std=np.sqrt(m2 / count), frame_count=count
    )


def align_envelopes(
    env: Envelope, peak_times, points: int = ALIGN_POINTS
) -> Envelope:
    """Resample an envelope onto the canonical [0, 1] stroke-time axis.

    The time axis is mapped affinely so the first channel's peak lands at 0
    and the last channel's at 1 (a reversed stroke is flipped onto the same
    axis); channels are linearly interpolated at ``points`` uniform stations.
    The result's ``sample_rate`` is ``points - 1`` per stroke unit; the
    original ``window_len`` is kept for reference only.
    """
    peaks = np.asarray(peak_times, dtype=np.float64)
    if peaks.size != env.n_channels:
        raise ValueError("need one peak time per channel")
    d = np.diff(peaks)
    if not ((d > 0).all() or (d < 0).all()):
        raise NonMonotonicPeaksError(
            "peak times must be strictly monotonic across channels"
        )
    return _resample_between(env, peaks[0], peaks[-1], points)


def _resample_between(env: Envelope, t_first: float, t_last: float, points: int) -> Envelope:
    """Affine resampling helper; assumes t_first != t_last."""
    t = env.times()
    tau = t_first + np.linspace(0.0, 1.0, points) * (t_last - t_first)
    rows = [np.interp(tau, t, env.per_channel[ch]) for ch in range(env.n_channels)]
    return Envelope(
        per_channel=np.stack(rows),
        sample_rate=points - 1,
        window_len=env.window_len,
        hop=1,
    )
