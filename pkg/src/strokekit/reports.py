"""CSV and SVG emission for envelopes, spectra, kinematics and fit results.

SVG output is generated directly (axes, polylines, a mean +/- std band) so no
plotting dependency is needed; CSV files round-trip through the readers in
this module.
"""
from __future__ import annotations

import json
from typing import Sequence

import numpy as np

from .errors import MalformedHeaderError
from .fitting import FitResult
from .model import Envelope, SpectrumStats, StrokeKinematics

_ENV_MAGIC = "# strokekit-envelope v1"

_PALETTE = (
    "#1f77b4", "#ff7f0e", "#2ca02c", "#d62728", "#9467bd",
    "#8c564b", "#e377c2", "#7f7f7f", "#bcbd22", "#17becf",
)


# --- envelope CSV -------------------------------------------------------------

def write_envelope_csv(env: Envelope, path) -> None:
    times = env.times()
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(
            f"{_ENV_MAGIC} sample_rate={env.sample_rate!r} "
            f"window_len={env.window_len!r} hop={env.hop}\n"
        )
        fh.write("time_s," + ",".join(f"ch{i}" for i in range(env.n_channels)) + "\n")
        for k in range(env.n_points):
            row = [repr(float(times[k]))] + [
                repr(float(v)) for v in env.per_channel[:, k]
            ]
            fh.write(",".join(row) + "\n")


def read_envelope_csv(path) -> Envelope:
    with open(path, "r", encoding="utf-8") as fh:
        magic = fh.readline()
        if not magic.startswith(_ENV_MAGIC):
            raise MalformedHeaderError("not a strokekit envelope CSV")
        fields = dict(
            part.split("=", 1) for part in magic[len(_ENV_MAGIC):].split() if "=" in part
        )
        fh.readline()  # column names
        rows = [line.rstrip("\n").split(",") for line in fh if line.strip()]
    data = np.array([[float(v) for v in row[1:]] for row in rows])
    return Envelope(
        per_channel=data.T,
        sample_rate=float(fields["sample_rate"]),
        window_len=float(fields["window_len"]),
        hop=int(fields["hop"]),
    )


# --- spectrum CSV -------------------------------------------------------------

def write_spectrum_csv(stats: SpectrumStats, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("freq_hz,mean,std,frame_count\n")
        for k in range(stats.bin_freqs.size):
            fh.write(
                f"{float(stats.bin_freqs[k])!r},{float(stats.mean[k])!r},"
                f"{float(stats.std[k])!r},{stats.frame_count}\n"
            )


def read_spectrum_csv(path) -> SpectrumStats:
    with open(path, "r", encoding="utf-8") as fh:
        header = fh.readline().strip()
        if header != "freq_hz,mean,std,frame_count":
            raise MalformedHeaderError("not a strokekit spectrum CSV")
        rows = [line.strip().split(",") for line in fh if line.strip()]
    if not rows:
        raise MalformedHeaderError("spectrum CSV has no rows")
    arr = np.array([[float(v) for v in row] for row in rows])
    return SpectrumStats(
        bin_freqs=arr[:, 0], mean=arr[:, 1], std=arr[:, 2], frame_count=int(arr[0, 3])
    )


# --- kinematics / fit JSON ----------------------------------------------------

def write_kinematics_json(entries: Sequence[tuple[str, StrokeKinematics]], path) -> None:
    """Entries are (source name, kinematics) pairs; emits a JSON array."""
    payload = [{"file": name, **kin.as_dict()} for name, kin in entries]
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(payload, fh, indent=2)
        fh.write("\n")


def read_kinematics_json(path) -> list[tuple[str, StrokeKinematics]]:
    with open(path, "r", encoding="utf-8") as fh:
        payload = json.load(fh)
    return [(d.get("file", ""), StrokeKinematics.from_dict(d)) for d in payload]


def write_fit_json(result: FitResult, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(result.as_dict(), fh, indent=2)
        fh.write("\n")


def read_fit_json(path) -> FitResult:
    with open(path, "r", encoding="utf-8") as fh:
        return FitResult.from_dict(json.load(fh))


# --- SVG ------------------------------------------------------------------------

_W, _H = 800, 450
_ML, _MR, _MT, _MB = 65, 20, 30, 45


def _axes(title: str, x_label: str, y_label: str, x_ticks, y_ticks, fmt="{:g}") -> list[str]:
    x0, x1 = _ML, _W - _MR
    y0, y1 = _H - _MB, _MT
    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{_W}" height="{_H}" '
        f'viewBox="0 0 {_W} {_H}" font-family="sans-serif" font-size="12">',
        f'<rect width="{_W}" height="{_H}" fill="white"/>',
        f'<text x="{_W / 2}" y="18" text-anchor="middle" font-size="14">{title}</text>',
        f'<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>',
        f'<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>',
        f'<text x="{(x0 + x1) / 2}" y="{_H - 8}" text-anchor="middle">{x_label}</text>',
        f'<text x="14" y="{(y0 + y1) / 2}" text-anchor="middle" '
        f'transform="rotate(-90 14 {(y0 + y1) / 2})">{y_label}</text>',
    ]
    for frac, value in x_ticks:
        px = x0 + frac * (x1 - x0)
        parts.append(f'<line x1="{px}" y1="{y0}" x2="{px}" y2="{y0 + 5}" stroke="black"/>')
        parts.append(
            f'<text x="{px}" y="{y0 + 18}" text-anchor="middle">{fmt.format(value)}</text>'
        )
    for frac, value in y_ticks:
        py = y0 - frac * (y0 - y1)
        parts.append(f'<line x1="{x0 - 5}" y1="{py}" x2="{x0}" y2="{py}" stroke="black"/>')
        parts.append(
            f'<text x="{x0 - 8}" y="{py + 4}" text-anchor="end">{fmt.format(value)}</text>'
        )
    return parts


def _scaler(lo: float, hi: float, p0: float, p1: float):
    span = (hi - lo) or 1.0
    return lambda v: p0 + (v - lo) / span * (p1 - p0)


def _ticks(lo: float, hi: float, count: int = 5):
    span = (hi - lo) or 1.0
    return [(i / (count - 1), lo + i / (count - 1) * span) for i in range(count)]


def _polyline(xs, ys, color: str, width: float = 1.5) -> str:
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in zip(xs, ys))
    return f'<polyline points="{pts}" fill="none" stroke="{color}" stroke-width="{width}"/>'


def svg_envelope_plot(env: Envelope, path, title: str = "RMS envelope per channel") -> None:
    """One trace per channel against window-center time."""
    t = env.times()
    vmax = float(env.per_channel.max()) or 1.0
    sx = _scaler(t[0], t[-1], _ML, _W - _MR)
    sy = _scaler(0.0, vmax, _H - _MB, _MT)
    parts = _axes(
        title, "time (s)", "RMS acceleration (m/s^2)",
        _ticks(float(t[0]), float(t[-1])), _ticks(0.0, vmax), fmt="{:.3g}",
    )
    for ch in range(env.n_channels):
        color = _PALETTE[ch % len(_PALETTE)]
        parts.append(_polyline(sx(t), sy(env.per_channel[ch]), color))
        parts.append(
            f'<text x="{_W - _MR - 4}" y="{_MT + 14 * (ch + 1)}" text-anchor="end" '
            f'fill="{color}">ch{ch}</text>'
        )
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")


def svg_spectrum_plot(
    stats: SpectrumStats, path, title: str = "Aggregate power spectrum"
) -> None:
    """Mean line with a +/- one-standard-deviation band."""
    f = stats.bin_freqs
    upper = stats.mean + stats.std
    lower = np.maximum(stats.mean - stats.std, 0.0)
    vmax = float(upper.max()) or 1.0
    sx = _scaler(float(f[0]), float(f[-1]), _ML, _W - _MR)
    sy = _scaler(0.0, vmax, _H - _MB, _MT)
    parts = _axes(
        title, "frequency (Hz)", "PSD ((m/s^2)^2/Hz)",
        _ticks(float(f[0]), float(f[-1])), _ticks(0.0, vmax), fmt="{:.3g}",
    )
    band = [(sx(x), sy(y)) for x, y in zip(f, upper)]
    band += [(sx(x), sy(y)) for x, y in zip(f[::-1], lower[::-1])]
    pts = " ".join(f"{x:.2f},{y:.2f}" for x, y in band)
    parts.append(f'<polygon points="{pts}" fill="#1f77b4" fill-opacity="0.25" stroke="none"/>')
    parts.append(_polyline(sx(f), sy(stats.mean), "#1f77b4", 2.0))
    parts.append("</svg>")
    with open(path, "w", encoding="utf-8") as fh:
        fh.write("\n".join(parts) + "\n")
