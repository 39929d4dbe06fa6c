"""Forward model of vibration transmission along the skin.

A moving fingertip source (synthetic caresses) or a line of vibrotactile
actuators (rendering candidate sequences) excites the surface; each sensor
receives the signal delayed by distance/wave_speed and attenuated by
exp(-distance/attenuation_length), distributed over the three accelerometer
axes by a fixed unit vector, with optional additive per-axis noise.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import BandLimitError
from .model import (
    ActuationSequence,
    CarrierSpec,
    ChannelLayout,
    DEFAULT_SAMPLE_RATE,
    PropagationParams,
    Recording,
)

_RAW_SPLIT = np.array([0.26, 0.53, 0.80])

#: Default axis distribution: an oblique unit vector so all 3 axes see signal.
DEFAULT_AXES_SPLIT = tuple(_RAW_SPLIT / np.linalg.norm(_RAW_SPLIT))


@dataclass(frozen=True)
class StrokeModel:
    """Idealized single caress: constant-velocity source on a line segment.

    The contact intensity follows a raised-cosine on/off profile whose ramps
    each cover ``ramp_fraction`` of the stroke duration. Carrier phases and
    sensor noise derive from ``seed``.
    """

    velocity: float
    start_pos: float = 0.0
    end_pos: float = 0.1
    ramp_fraction: float = 0.25
    carrier: CarrierSpec = CarrierSpec(((125.0, 1.0),))
    seed: int = 0

    def __post_init__(self):
        if self.start_pos == self.end_pos:
            raise ValueError("start_pos and end_pos must differ")
        if self.velocity == 0 or np.sign(self.velocity) != np.sign(self.end_pos - self.start_pos):
            raise ValueError("velocity sign must match end_pos - start_pos")
        if not 0.0 <= self.ramp_fraction <= 0.5:
            raise ValueError("ramp_fraction must lie in [0, 0.5]")

    @property
    def stroke_duration(self) -> float:
        return (self.end_pos - self.start_pos) / self.velocity

    def as_dict(self):
        return {
            "velocity": self.velocity,
            "start_pos": self.start_pos,
            "end_pos": self.end_pos,
            "ramp_fraction": self.ramp_fraction,
            "carrier": self.carrier.as_list(),
            "seed": self.seed,
        }

    @classmethod
    def from_dict(cls, d) -> "StrokeModel":
        return cls(
            velocity=float(d["velocity"]),
            start_pos=float(d.get("start_pos", 0.0)),
            end_pos=float(d.get("end_pos", 0.1)),
            ramp_fraction=float(d.get("ramp_fraction", 0.25)),
            carrier=CarrierSpec(tuple((f, a) for f, a in d.get("carrier", [[125.0, 1.0]]))),
            seed=int(d.get("seed", 0)),
        )


def carrier_phases(carrier: CarrierSpec, seed: int) -> np.ndarray:
    """Per-component phases drawn from the seeded generator."""
    rng = np.random.default_rng(np.random.SeedSequence(seed))
    return rng.uniform(0.0, 2.0 * np.pi, len(carrier.components))


def carrier_wave(carrier: CarrierSpec, t: np.ndarray, phases: np.ndarray) -> np.ndarray:
    """Sum of the carrier's sinusoids evaluated at times ``t``."""
    out = np.zeros_like(t)
    for (freq, amp), phi in zip(carrier.components, phases):
        out += amp * np.sin(2.0 * np.pi * freq * t + phi)
    return out


def raised_cosine_gate(u: np.ndarray, ramp_fraction: float) -> np.ndarray:
    """On/off profile over normalized span ``u`` in [0, 1]; zero outside.

    Cosine ramps cover ``ramp_fraction`` of the span at each end; 0 gives a
    rectangular gate, 0.5 a full raised cosine with no flat top.
    """
    u = np.asarray(u, dtype=np.float64)
    out = np.zeros_like(u)
    inside = (u >= 0.0) & (u <= 1.0)
    if ramp_fraction <= 0.0:
        out[inside] = 1.0
        return out
    ui = u[inside]
    v = np.ones_like(ui)
    lo = ui < ramp_fraction
    v[lo] = 0.5 * (1.0 - np.cos(np.pi * ui[lo] / ramp_fraction))
    hi = ui > 1.0 - ramp_fraction
    v[hi] = 0.5 * (1.0 - np.cos(np.pi * (1.0 - ui[hi]) / ramp_fraction))
    out[inside] = v
    return out


def _check_band(carrier: CarrierSpec, sample_rate: float) -> None:
    top = float(carrier.frequencies.max())
    if top > sample_rate / 2.0:
        raise BandLimitError(
            f"carrier at {top} Hz exceeds the Nyquist limit {sample_rate / 2.0} Hz"
        )


def _noise_streams(seed: int, n_channels: int):
    return np.random.SeedSequence(seed).spawn(n_channels)


def _split_vector(axes_split) -> np.ndarray:
    v = np.asarray(
        DEFAULT_AXES_SPLIT if axes_split is None else axes_split, dtype=np.float64
    )
    if v.shape != (3,) or not np.isfinite(v).all() or not np.linalg.norm(v) > 0:
        raise ValueError("axes_split must be a finite non-zero 3-vector")
    return v / np.linalg.norm(v)


def simulate_stroke(
    model: StrokeModel,
    params: PropagationParams,
    layout: ChannelLayout | None = None,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    *,
    axes_split=None,
    duration: float | None = None,
    stroke_onset: float = 0.25,
) -> Recording:
    """Render the accelerometer response to one synthetic caress.

    The source sits at ``start_pos + velocity * (t - stroke_onset)`` while the
    gate is open, clamped to the path ends outside it. Channel ``i`` receives
    the source signal evaluated at ``t - d_i(t)/wave_speed`` and scaled by
    ``exp(-d_i(t)/attenuation_length)``. Deterministic for a fixed seed.
    """
    layout = layout or ChannelLayout()
    _check_band(model.carrier, sample_rate)
    split = _split_vector(axes_split)

    stroke_t = model.stroke_duration
    pos = np.asarray(layout.positions)
    span = max(
        float(np.abs(pos[:, None] - [model.start_pos, model.end_pos]).max()),
        abs(model.end_pos - model.start_pos),
    )
    max_delay = span / params.wave_speed
    if duration is None:
        duration = 2 * stroke_onset + stroke_t + max_delay
    n = int(round(duration * sample_rate))
    if n < 1:
        raise ValueError("duration too short for one sample")
    t = np.arange(n) / sample_rate

    phases = carrier_phases(model.carrier, model.seed)
    lo, hi = sorted((model.start_pos, model.end_pos))
    source_pos = np.clip(model.start_pos + model.velocity * (t - stroke_onset), lo, hi)

    streams = _noise_streams(model.seed, len(layout))
    channels = np.empty((len(layout), 3, n))
    for ch, x_ch in enumerate(layout.positions):
        dist = np.abs(x_ch - source_pos)
        tau = t - dist / params.wave_speed
        gate = raised_cosine_gate((tau - stroke_onset) / stroke_t, model.ramp_fraction)
        scalar = gate * carrier_wave(model.carrier, tau, phases) * np.exp(
            -dist / params.attenuation_length
        )
        axes = split[:, None] * scalar[None, :]
        if params.noise_sigma > 0:
            rng = np.random.default_rng(streams[ch])
            axes = axes + rng.normal(0.0, params.noise_sigma, (3, n))
        channels[ch] = axes

    meta = {"source": "simulate_stroke", "seed": model.seed, "velocity": model.velocity}
    return Recording(channels=channels, sample_rate=sample_rate, layout=layout, meta=meta)


def render_sequence(
    seq: ActuationSequence,
    params: PropagationParams,
    layout: ChannelLayout | None = None,
    sample_rate: float = DEFAULT_SAMPLE_RATE,
    *,
    axes_split=None,
    duration: float | None = None,
    seed: int = 0,
) -> Recording:
    """Render the accelerometer response to an actuation sequence.

    Each actuator plays the shared carrier from its own onset (so shifting
    every onset shifts the output), shaped by its trapezoid envelope; channel
    ``i`` receives the superposition of all actuators, each delayed and
    attenuated by the fixed channel-actuator distance.
    """
    layout = layout or ChannelLayout()
    _check_band(seq.carrier, sample_rate)
    split = _split_vector(axes_split)

    pos = np.asarray(layout.positions)
    apos = np.asarray(seq.actuator_positions)
    max_delay = float(np.abs(pos[:, None] - apos[None, :]).max()) / params.wave_speed
    if duration is None:
        duration = max(seq.end_time(), 0.0) + max_delay + 0.1
    n = int(round(duration * sample_rate))
    if n < 1:
        raise ValueError("duration too short for one sample")
    t = np.arange(n) / sample_rate

    phases = carrier_phases(seq.carrier, seed)
    streams = _noise_streams(seed, len(layout))
    channels = np.empty((len(layout), 3, n))
    for ch, x_ch in enumerate(layout.positions):
        scalar = np.zeros(n)
        for act, p_act in zip(seq.activations, seq.actuator_positions):
            dist = abs(x_ch - p_act)
            delay = dist / params.wave_speed
            start = act.onset + delay
            first = max(0, int(np.ceil(start * sample_rate - 1e-9)))
            last = min(n, int(np.floor((start + act.duration) * sample_rate + 1e-9)) + 1)
            if first >= last:
                continue
            rel = t[first:last] - start  # time since this actuator's onset
            wave = raised_cosine_gate(rel / act.duration, act.ramp_fraction)
            wave *= carrier_wave(seq.carrier, rel, phases)
            wave *= np.exp(-dist / params.attenuation_length)
            scalar[first:last] += act.peak_amplitude * wave
        axes = split[:, None] * scalar[None, :]
        if params.noise_sigma > 0:
            rng = np.random.default_rng(streams[ch])
            axes = axes + rng.normal(0.0, params.noise_sigma, (3, n))
        channels[ch] = axes

    meta = {"source": "render_sequence", "seed": seed}
    return Recording(channels=channels, sample_rate=sample_rate, layout=layout, meta=meta)
