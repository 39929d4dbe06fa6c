"""strokekit: analyze skin-stroke accelerometer recordings and fit
vibrotactile actuation sequences that reproduce them."""

from ._kernels import BACKEND as kernel_backend
from .daq import (
    CalibrationParams,
    Frame,
    decode_frame,
    encode_frame,
    frames_to_recording,
    read_frame_stream,
    read_recording_file,
    resync,
    write_recording_file,
)
from .dsp import (
    FrameSpec,
    aggregate_spectra,
    align_envelopes,
    axis_magnitude,
    detrend,
    envelope_of_recording,
    kaiser_window,
    power_spectrum_frames,
    rms_envelope,
)
from .fitting import FitConfig, FitResult, fit, heuristic_init, objective
from .kinematics import detect_peaks, estimate_kinematics, stroke_duration_per_channel
from .model import (
    ActuationSequence,
    Activation,
    CarrierSpec,
    ChannelLayout,
    Envelope,
    PropagationParams,
    Recording,
    SpectrumStats,
    StrokeKinematics,
    validate_recording,
)
from .propagation import StrokeModel, render_sequence, simulate_stroke

__version__ = "0.1.0"

__all__ = [
    "ActuationSequence",
    "Activation",
    "CalibrationParams",
    "CarrierSpec",
    "ChannelLayout",
    "Envelope",
    "FitConfig",
    "FitResult",
    "Frame",
    "FrameSpec",
    "PropagationParams",
    "Recording",
    "SpectrumStats",
    "StrokeKinematics",
    "StrokeModel",
    "aggregate_spectra",
    "align_envelopes",
    "axis_magnitude",
    "decode_frame",
    "detect_peaks",
    "detrend",
    "encode_frame",
    "envelope_of_recording",
    "estimate_kinematics",
    "fit",
    "frames_to_recording",
    "heuristic_init",
    "kaiser_window",
    "kernel_backend",
    "objective",
    "power_spectrum_frames",
    "read_frame_stream",
    "read_recording_file",
    "render_sequence",
    "resync",
    "rms_envelope",
    "simulate_stroke",
    "stroke_duration_per_channel",
    "validate_recording",
    "write_recording_file",
]
