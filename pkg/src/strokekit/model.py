"""Shared immutable data types for stroke recordings and actuator sequences.

Positions are scalar coordinates along the stroke path (meters), acceleration
is m/s^2 throughout, and every type is frozen after construction so instances
can be shared freely between threads and cached analyses.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Any, Mapping, Sequence

import numpy as np

#: Standard gravity used for ADC-code conversion, m/s^2.
STANDARD_GRAVITY = 9.80665

#: Default sensor line: 6 channels at 20 mm pitch along the stroke path.
DEFAULT_POSITIONS = (0.0, 0.02, 0.04, 0.06, 0.08, 0.1)

#: Default acquisition sample rate, Hz.
DEFAULT_SAMPLE_RATE = 2000.0

AXIS_NAMES = ("x", "y", "z")


def _readonly(a: np.ndarray) -> np.ndarray:
    out = np.ascontiguousarray(a, dtype=np.float64)
    if out is a and a.flags.writeable:
        out = out.copy()
    out.setflags(write=False)
    return out


@dataclass(frozen=True)
class ChannelLayout:
    """Ordered sensor positions along the stroke path, in meters."""

    positions: tuple[float, ...] = DEFAULT_POSITIONS
    labels: tuple[str, ...] | None = None

    def __post_init__(self):
        pos = tuple(float(p) for p in self.positions)
        object.__setattr__(self, "positions", pos)
        if len(pos) < 2:
            raise ValueError("layout needs at least 2 channels")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ValueError("positions must be strictly increasing")
        if not all(np.isfinite(pos)):
            raise ValueError("positions must be finite")
        if self.labels is not None:
            labels = tuple(str(s) for s in self.labels)
            if len(labels) != len(pos):
                raise ValueError("labels length must match positions")
            object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return len(self.positions)

    @property
    def pitch(self) -> float:
        """Mean spacing between adjacent channels, meters."""
        p = np.asarray(self.positions)
        return float(np.diff(p).mean())


@dataclass(frozen=True, eq=False)
class Recording:
    """Immutable multi-channel, 3-axis acceleration time series.

    ``channels`` has shape ``(n_channels, 3, n_samples)`` in m/s^2. Data-level
    problems (non-finite samples, channel count not matching the layout) are
    reported by :func:`validate_recording` rather than rejected here, so that
    readers can load a suspect file and inspect it.
    """

    channels: np.ndarray
    sample_rate: float = DEFAULT_SAMPLE_RATE
    layout: ChannelLayout = field(default_factory=ChannelLayout)
    meta: dict[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        arr = np.asarray(self.channels, dtype=np.float64)
        if arr.ndim != 3 or arr.shape[1] != 3 or arr.shape[2] < 1:
            raise ValueError(
                f"channels must have shape (n_channels, 3, n_samples>=1), got {arr.shape}"
            )
        object.__setattr__(self, "channels", _readonly(arr))
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        object.__setattr__(self, "meta", dict(self.meta))

    @property
    def n_channels(self) -> int:
        return self.channels.shape[0]

    @property
    def n_samples(self) -> int:
        return self.channels.shape[2]

    @property
    def duration(self) -> float:
        """Record length in seconds."""
        return self.n_samples / self.sample_rate

    def axis(self, channel: int, axis: int) -> np.ndarray:
        return self.channels[channel, axis]


def validate_recording(rec: Recording) -> list[str]:
    """Return every invariant violation of ``rec`` (empty list means valid)."""
    violations: list[str] = []
    if rec.sample_rate <= 0 or not np.isfinite(rec.sample_rate):
        violations.append(f"sample_rate must be positive and finite, got {rec.sample_rate}")
    if rec.n_channels != len(rec.layout):
        violations.append(
            f"channel count {rec.n_channels} != layout channel count {len(rec.layout)}"
        )
    finite = np.isfinite(rec.channels)
    if not finite.all():
        for ch, ax in zip(*np.nonzero(~finite.all(axis=2))):
            bad = int(np.nonzero(~finite[ch, ax])[0][0])
            violations.append(
                f"channel {ch} axis {AXIS_NAMES[ax]}: non-finite sample at index {bad}"
            )
    return violations


@dataclass(frozen=True, eq=False)
class Envelope:
    """Per-channel RMS intensity series derived from a recording.

    ``sample_rate`` is the rate of the envelope series itself (acquisition
    rate divided by the hop). ``per_channel`` has shape (n_channels, n_points)
    and is non-negative. Sample ``k`` of a channel summarizes the analysis
    window starting at input sample ``k * hop``; its nominal time is
    ``k / sample_rate + window_len / 2`` (window-center convention).
    """

    per_channel: np.ndarray
    sample_rate: float
    window_len: float
    hop: int = 1

    def __post_init__(self):
        arr = np.asarray(self.per_channel, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[1] < 1:
            raise ValueError(f"per_channel must be 2-D (n_channels, n_points), got {arr.shape}")
        if not np.isfinite(arr).all():
            raise ValueError("envelope values must be finite")
        if (arr < 0).any():
            raise ValueError("envelope values must be non-negative")
        if self.sample_rate <= 0:
            raise ValueError("sample_rate must be positive")
        if self.window_len < 0:
            raise ValueError("window_len must be non-negative")
        if int(self.hop) < 1:
            raise ValueError("hop must be >= 1")
        object.__setattr__(self, "per_channel", _readonly(arr))
        object.__setattr__(self, "sample_rate", float(self.sample_rate))
        object.__setattr__(self, "window_len", float(self.window_len))
        object.__setattr__(self, "hop", int(self.hop))

    @property
    def n_channels(self) -> int:
        return self.per_channel.shape[0]

    @property
    def n_points(self) -> int:
        return self.per_channel.shape[1]

    def times(self) -> np.ndarray:
        """Window-center time of each envelope sample, seconds."""
        return np.arange(self.n_points) / self.sample_rate + self.window_len / 2


@dataclass(frozen=True, eq=False)
class SpectrumStats:
    """Per-bin mean and standard deviation of power spectral density.

    Bin frequencies run from 0 at uniform spacing (the transform resolution);
    units of mean/std are (m/s^2)^2/Hz. ``frame_count`` is the number of
    channel-frames aggregated, which makes the population statistics auditable.
    """

    bin_freqs: np.ndarray
    mean: np.ndarray
    std: np.ndarray
    frame_count: int

    def __post_init__(self):
        f = np.asarray(self.bin_freqs, dtype=np.float64)
        m = np.asarray(self.mean, dtype=np.float64)
        s = np.asarray(self.std, dtype=np.float64)
        if not (f.ndim == m.ndim == s.ndim == 1 and f.size == m.size == s.size >= 1):
            raise ValueError("bin_freqs, mean and std must be 1-D and equally long")
        if f[0] != 0.0:
            raise ValueError("bin frequencies must start at 0")
        if f.size > 1:
            df = np.diff(f)
            if (df <= 0).any() or not np.allclose(df, df[0], rtol=1e-9, atol=0):
                raise ValueError("bin frequencies must ascend at uniform spacing")
        if (m < 0).any() or (s < 0).any():
            raise ValueError("mean and std must be non-negative")
        if int(self.frame_count) <= 0:
            raise ValueError("frame_count must be positive")
        object.__setattr__(self, "bin_freqs", _readonly(f))
        object.__setattr__(self, "mean", _readonly(m))
        object.__setattr__(self, "std", _readonly(s))
        object.__setattr__(self, "frame_count", int(self.frame_count))

    @property
    def bin_width(self) -> float:
        return float(self.bin_freqs[1] - self.bin_freqs[0]) if self.bin_freqs.size > 1 else 0.0


@dataclass(frozen=True)
class StrokeKinematics:
    """Velocity, timing and uniformity estimates for one stroke.

    ``velocity`` is signed: positive means motion toward increasing positions.
    ``uniformity`` is the coefficient of variation of the segment velocities
    between adjacent channels (0 = perfectly uniform motion).
    """

    velocity: float
    peak_times: tuple[float, ...]
    duration: float
    r_squared: float
    uniformity: float
    warnings: tuple[str, ...] = ()

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("duration must be positive")
        if self.velocity == 0 or not np.isfinite(self.velocity):
            raise ValueError("velocity must be finite and nonzero")
        if not 0.0 <= self.r_squared <= 1.0:
            raise ValueError("r_squared must lie in [0, 1]")
        object.__setattr__(self, "peak_times", tuple(float(t) for t in self.peak_times))
        object.__setattr__(self, "warnings", tuple(self.warnings))

    def as_dict(self) -> dict[str, Any]:
        return {
            "velocity": self.velocity,
            "peak_times": list(self.peak_times),
            "duration": self.duration,
            "r_squared": self.r_squared,
            "uniformity": self.uniformity,
            "warnings": list(self.warnings),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "StrokeKinematics":
        return cls(
            velocity=float(d["velocity"]),
            peak_times=tuple(d["peak_times"]),
            duration=float(d["duration"]),
            r_squared=float(d["r_squared"]),
            uniformity=float(d["uniformity"]),
            warnings=tuple(d.get("warnings", ())),
        )


@dataclass(frozen=True)
class PropagationParams:
    """Skin transmission model: exponential spatial decay plus finite speed.

    ``attenuation_length`` is the distance over which amplitude falls by e;
    ``wave_speed`` the surface propagation speed. Both accept ``inf`` to
    switch the effect off. ``noise_sigma`` is additive per-axis sensor noise.
    """

    attenuation_length: float = 0.02
    wave_speed: float = 5.0
    noise_sigma: float = 0.0

    def __post_init__(self):
        if not self.attenuation_length > 0:
            raise ValueError("attenuation_length must be positive")
        if not self.wave_speed > 0:
            raise ValueError("wave_speed must be positive")
        if self.noise_sigma < 0:
            raise ValueError("noise_sigma must be non-negative")

    def as_dict(self) -> dict[str, float]:
        return {
            "attenuation_length": self.attenuation_length,
            "wave_speed": self.wave_speed,
            "noise_sigma": self.noise_sigma,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "PropagationParams":
        return cls(**{k: float(v) for k, v in d.items()})


#: Highest carrier frequency the target actuator hardware can deliver, Hz.
MAX_CARRIER_FREQ = 500.0


@dataclass(frozen=True)
class CarrierSpec:
    """Multi-component vibration carrier: (frequency Hz, amplitude m/s^2) pairs."""

    components: tuple[tuple[float, float], ...]

    def __post_init__(self):
        comps = tuple((float(f), float(a)) for f, a in self.components)
        if not comps:
            raise ValueError("carrier needs at least one component")
        for f, a in comps:
            if not 0.0 < f <= MAX_CARRIER_FREQ:
                raise ValueError(f"carrier frequency {f} Hz outside (0, {MAX_CARRIER_FREQ}]")
            if not (np.isfinite(a) and a >= 0.0):
                raise ValueError(f"carrier amplitude {a} must be finite and non-negative")
        object.__setattr__(self, "components", comps)

    @property
    def frequencies(self) -> np.ndarray:
        return np.array([f for f, _ in self.components])

    @property
    def amplitudes(self) -> np.ndarray:
        return np.array([a for _, a in self.components])

    def rms(self) -> float:
        """RMS of the carrier waveform at unit envelope (incommensurate phases)."""
        return float(np.sqrt(np.sum(self.amplitudes**2) / 2.0))

    def as_list(self) -> list[list[float]]:
        return [[f, a] for f, a in self.components]


@dataclass(frozen=True)
class Activation:
    """One actuator's drive: onset/duration in seconds, trapezoid envelope
    with raised-cosine ramps covering ``ramp_fraction`` of the duration at
    each end."""

    onset: float
    duration: float
    peak_amplitude: float
    ramp_fraction: float = 0.25

    def __post_init__(self):
        if not self.duration > 0:
            raise ValueError("activation duration must be positive")
        if self.peak_amplitude < 0:
            raise ValueError("peak_amplitude must be non-negative")
        if not 0.0 <= self.ramp_fraction <= 0.5:
            raise ValueError("ramp_fraction must lie in [0, 0.5]")

    def as_dict(self) -> dict[str, float]:
        return {
            "onset": self.onset,
            "duration": self.duration,
            "peak_amplitude": self.peak_amplitude,
            "ramp_fraction": self.ramp_fraction,
        }


@dataclass(frozen=True)
class ActuationSequence:
    """Per-actuator activations plus the shared carrier; the object of the fit."""

    actuator_positions: tuple[float, ...]
    activations: tuple[Activation, ...]
    carrier: CarrierSpec

    def __post_init__(self):
        pos = tuple(float(p) for p in self.actuator_positions)
        object.__setattr__(self, "actuator_positions", pos)
        object.__setattr__(self, "activations", tuple(self.activations))
        if not pos:
            raise ValueError("sequence needs at least one actuator")
        if any(b <= a for a, b in zip(pos, pos[1:])):
            raise ValueError("actuator positions must be strictly increasing")
        if len(self.activations) != len(pos):
            raise ValueError("need exactly one activation per actuator")

    @property
    def n_actuators(self) -> int:
        return len(self.actuator_positions)

    @property
    def onsets(self) -> np.ndarray:
        return np.array([a.onset for a in self.activations])

    def end_time(self) -> float:
        """Latest activation end across actuators, seconds."""
        return max(a.onset + a.duration for a in self.activations)

    def scaled(self, factor: float) -> "ActuationSequence":
        """Copy with all peak amplitudes multiplied by ``factor``."""
        acts = tuple(
            Activation(a.onset, a.duration, a.peak_amplitude * factor, a.ramp_fraction)
            for a in self.activations
        )
        return ActuationSequence(self.actuator_positions, acts, self.carrier)

    def as_dict(self) -> dict[str, Any]:
        return {
            "actuator_positions": list(self.actuator_positions),
            "activations": [a.as_dict() for a in self.activations],
            "carrier": self.carrier.as_list(),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ActuationSequence":
        return cls(
            actuator_positions=tuple(d["actuator_positions"]),
            activations=tuple(Activation(**a) for a in d["activations"]),
            carrier=CarrierSpec(tuple((f, a) for f, a in d["carrier"])),
        )
