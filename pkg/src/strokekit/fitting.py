"""Inverse fit: choose actuation parameters whose simulated skin response
reproduces a target recording's envelopes and aggregate spectrum.

The objective renders a candidate sequence noise-free, pushes it through the
same envelope/spectrum pipeline as the target, and combines a normalized
envelope mismatch (in aligned stroke time, so absolute trigger timing drops
out) with a normalized mean-spectrum mismatch. A budget-bounded Nelder-Mead
simplex with reflection-at-bounds and restart-on-collapse searches the free
parameters.
"""
from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Any, Callable, Mapping

import numpy as np

from . import dsp
from .dsp import FrameSpec
from .errors import DegenerateTargetError, InvalidRecordingError
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
from .propagation import render_sequence

#: Objective value returned when a candidate's response is too degenerate to
#: align (e.g. silent first/last channel); large enough to repel the simplex.
_PENALTY_FACTOR = 16.0

_DURATION_BOUNDS = (0.02, 2.0)


@dataclass(frozen=True)
class FitConfig:
    """Weights, free-parameter flags, optimizer budget and pipeline settings.

    The pipeline settings (window, hops, alignment grid) apply identically to
    the target and to every candidate render, so the comparison is apples to
    apples; hops above 1 trade timing resolution for objective speed.
    """

    w_env: float = 1.0
    w_spec: float = 1.0
    uniform_soa: bool = True
    shared_duration: bool = True
    free_carrier_amps: bool = False
    budget: int = 2000
    tol: float = 1e-6
    init_step: float = 0.3
    global_starts: int = 3
    window_len: float = dsp.DEFAULT_WINDOW_LEN
    env_hop: int = 2
    frame: FrameSpec = FrameSpec(hop=32)
    align_points: int = dsp.ALIGN_POINTS
    max_freq: float = dsp.DEFAULT_MAX_FREQ
    render_seed: int = 0

    def __post_init__(self):
        if self.w_env < 0 or self.w_spec < 0 or (self.w_env == 0 and self.w_spec == 0):
            raise ValueError("weights must be non-negative and not both zero")
        if int(self.budget) < 1:
            raise ValueError("budget must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if not self.init_step > 0:
            raise ValueError("init_step must be positive")
        if int(self.global_starts) < 0:
            raise ValueError("global_starts must be >= 0")
        if int(self.env_hop) < 1 or int(self.align_points) < 2:
            raise ValueError("env_hop must be >= 1 and align_points >= 2")
        object.__setattr__(self, "budget", int(self.budget))
        object.__setattr__(self, "global_starts", int(self.global_starts))
        object.__setattr__(self, "env_hop", int(self.env_hop))
        object.__setattr__(self, "align_points", int(self.align_points))

    def as_dict(self) -> dict[str, Any]:
        return {
            "w_env": self.w_env,
            "w_spec": self.w_spec,
            "uniform_soa": self.uniform_soa,
            "shared_duration": self.shared_duration,
            "free_carrier_amps": self.free_carrier_amps,
            "budget": self.budget,
            "tol": self.tol,
            "init_step": self.init_step,
            "global_starts": self.global_starts,
            "window_len": self.window_len,
            "env_hop": self.env_hop,
            "n_fft": self.frame.n_fft,
            "beta": self.frame.beta,
            "spec_hop": self.frame.hop,
            "align_points": self.align_points,
            "max_freq": self.max_freq,
            "render_seed": self.render_seed,
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FitConfig":
        d = dict(d)
        frame = FrameSpec(
            n_fft=int(d.pop("n_fft", 128)),
            beta=float(d.pop("beta", 8.0)),
            hop=int(d.pop("spec_hop", 32)),
        )
        return cls(frame=frame, **d)


@dataclass(frozen=True)
class FitResult:
    """Best sequence found plus the bookkeeping needed to audit the search."""

    sequence: ActuationSequence
    objective: float
    envelope_term: float
    spectrum_term: float
    evaluations: int
    converged: bool
    trace: tuple[float, ...] = ()

    def __post_init__(self):
        if self.objective < 0:
            raise ValueError("objective must be non-negative")

    def as_dict(self) -> dict[str, Any]:
        return {
            "sequence": self.sequence.as_dict(),
            "objective": self.objective,
            "envelope_term": self.envelope_term,
            "spectrum_term": self.spectrum_term,
            "evaluations": self.evaluations,
            "converged": self.converged,
            "trace": list(self.trace),
        }

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "FitResult":
        return cls(
            sequence=ActuationSequence.from_dict(d["sequence"]),
            objective=float(d["objective"]),
            envelope_term=float(d["envelope_term"]),
            spectrum_term=float(d["spectrum_term"]),
            evaluations=int(d["evaluations"]),
            converged=bool(d["converged"]),
            trace=tuple(d.get("trace", ())),
        )


@dataclass(frozen=True)
class TargetFeatures:
    """Everything the objective needs to know about the target recording."""

    envelope: Envelope
    aligned: Envelope
    spectrum: SpectrumStats
    kinematics: StrokeKinematics
    contact_durations: np.ndarray
    peak_value: float
    duration: float
    sample_rate: float
    layout: ChannelLayout


def analyze_target(rec: Recording, cfg: FitConfig = FitConfig()) -> TargetFeatures:
    """Run the analysis pipeline on a fit target."""
    violations = validate_recording(rec)
    if violations:
        raise InvalidRecordingError("; ".join(violations))
    env = dsp.envelope_of_recording(rec, cfg.window_len, cfg.env_hop)
    peak_value = float(env.per_channel.max())
    if peak_value == 0.0:
        raise DegenerateTargetError("target envelope is identically zero")
    peaks = detect_peaks(env)
    kin = estimate_kinematics(peaks, rec.layout)
    aligned = dsp.align_envelopes(env, [t for t, _ in peaks], cfg.align_points)
    spectrum = dsp.aggregate_spectra([rec], cfg.frame, cfg.max_freq)
    if not spectrum.mean.any():
        raise DegenerateTargetError("target spectrum is identically zero")
    return TargetFeatures(
        envelope=env,
        aligned=aligned,
        spectrum=spectrum,
        kinematics=kin,
        contact_durations=stroke_duration_per_channel(env),
        peak_value=peak_value,
        duration=rec.duration,
        sample_rate=rec.sample_rate,
        layout=rec.layout,
    )


def objective_terms(
    seq: ActuationSequence,
    target_env: Envelope,
    target_spec: SpectrumStats,
    params: PropagationParams,
    layout: ChannelLayout,
    sample_rate: float,
    cfg: FitConfig = FitConfig(),
    *,
    duration: float | None = None,
) -> tuple[float, float, float]:
    """(objective, envelope term, spectrum term) for one candidate.

    ``target_env`` must already live on the aligned stroke-time axis. The
    candidate is rendered noise-free through the identical pipeline: envelope,
    peak detection, alignment onto the canonical stroke axis, and spectrum
    aggregation all reuse the code path that produced the target features, so
    a candidate that reproduces the target scores exactly zero. A candidate
    whose response cannot be aligned (a silent or simultaneous-peaked
    envelope) earns a flat penalty well above any real mismatch.
    """
    env_den = float((target_env.per_channel**2).sum())
    spec_den = float((target_spec.mean**2).sum())
    if env_den == 0.0 or spec_den == 0.0:
        raise DegenerateTargetError("target envelope or spectrum is identically zero")

    quiet = replace(params, noise_sigma=0.0)
    rec = render_sequence(
        seq, quiet, layout, sample_rate, duration=duration, seed=cfg.render_seed
    )
    env = dsp.envelope_of_recording(rec, cfg.window_len, cfg.env_hop)
    peaks = detect_peaks(env, strict=False)
    t_first, t_last = peaks[0][0], peaks[-1][0]
    penalty = _PENALTY_FACTOR * (cfg.w_env + cfg.w_spec)
    if t_first == t_last or env.per_channel[0].max() == 0 or env.per_channel[-1].max() == 0:
        return penalty, penalty, penalty
    aligned = dsp._resample_between(env, t_first, t_last, target_env.n_points)

    env_term = float(((aligned.per_channel - target_env.per_channel) ** 2).sum()) / env_den
    spec = dsp.aggregate_spectra([rec], cfg.frame, cfg.max_freq)
    spec_term = float(((spec.mean - target_spec.mean) ** 2).sum()) / spec_den
    return cfg.w_env * env_term + cfg.w_spec * spec_term, env_term, spec_term


def objective(
    seq: ActuationSequence,
    target_env: Envelope,
    target_spec: SpectrumStats,
    params: PropagationParams,
    layout: ChannelLayout,
    sample_rate: float,
    cfg: FitConfig = FitConfig(),
    *,
    duration: float | None = None,
) -> float:
    """Scalar mismatch between a candidate sequence and the target features."""
    return objective_terms(
        seq, target_env, target_spec, params, layout, sample_rate, cfg, duration=duration
    )[0]


def heuristic_init(
    kin: StrokeKinematics,
    env: Envelope,
    spectrum: SpectrumStats,
    actuator_positions,
) -> ActuationSequence:
    """Starting sequence from the target's measured features.

    Onset spacing is actuator pitch over stroke speed, duration the median
    per-channel contact duration, amplitude the median per-channel envelope
    peak, and the carrier takes the three strongest spectral bins with
    amplitudes proportional to the square root of their density (normalized
    to unit carrier RMS).
    """
    pos = tuple(float(p) for p in actuator_positions)
    n_act = len(pos)
    pitch = float(np.diff(pos).mean()) if n_act > 1 else 0.0
    soa = pitch / abs(kin.velocity)

    dur = float(np.median(stroke_duration_per_channel(env)))
    dur = min(max(dur, _DURATION_BOUNDS[0]), _DURATION_BOUNDS[1])
    peak_amp = float(np.median(env.per_channel.max(axis=1)))

    mean = np.asarray(spectrum.mean)
    usable = np.flatnonzero((spectrum.bin_freqs > 0) & (mean > 0))
    if usable.size == 0:
        raise DegenerateTargetError("target spectrum has no usable bins")
    top = usable[np.argsort(mean[usable])][-3:]
    top = np.sort(top)
    amps = np.sqrt(mean[top])
    amps = amps * np.sqrt(2.0 / (amps**2).sum())  # unit carrier RMS
    carrier = CarrierSpec(tuple(zip(spectrum.bin_freqs[top], amps)))

    # fire in stroke order: first-struck channel's peak centers its activation
    forward = kin.velocity > 0
    anchor_peak = kin.peak_times[0] if forward else kin.peak_times[-1]
    anchor = max(0.0, anchor_peak - dur / 2)
    ranks = np.arange(n_act) if forward else np.arange(n_act)[::-1]
    acts = tuple(
        Activation(onset=anchor + r * soa, duration=dur, peak_amplitude=peak_amp)
        for r in ranks
    )
    return ActuationSequence(pos, acts, carrier)


# --- parameter vector <-> sequence ------------------------------------------

@dataclass
class _ParamSpace:
    cfg: FitConfig
    init: ActuationSequence
    anchor: float
    ranks: np.ndarray
    lo: np.ndarray
    hi: np.ndarray
    x0: np.ndarray
    names: list[str]

    def build(self, theta: np.ndarray) -> ActuationSequence:
        i = 0
        n_act = self.init.n_actuators
        onsets = self.init.onsets.copy()
        if self.cfg.uniform_soa:
            if n_act > 1:
                onsets = self.anchor + self.ranks * theta[i]
                i += 1
        else:
            onsets = theta[i : i + n_act].copy()
            i += n_act
        if self.cfg.shared_duration:
            durations = np.full(n_act, theta[i])
            i += 1
        else:
            durations = theta[i : i + n_act].copy()
            i += n_act
        carrier = self.init.carrier
        if self.cfg.free_carrier_amps:
            k = len(carrier.components)
            amps = theta[i : i + k]
            i += k
            carrier = CarrierSpec(
                tuple((f, float(a)) for (f, _), a in zip(carrier.components, amps))
            )
        acts = tuple(
            Activation(
                onset=float(o),
                duration=float(d),
                peak_amplitude=a.peak_amplitude,
                ramp_fraction=a.ramp_fraction,
            )
            for o, d, a in zip(onsets, durations, self.init.activations)
        )
        return ActuationSequence(self.init.actuator_positions, acts, carrier)


def _param_space(cfg: FitConfig, init: ActuationSequence, target: TargetFeatures) -> _ParamSpace:
    onsets = init.onsets
    order = np.argsort(onsets, kind="stable")
    ranks = np.empty(init.n_actuators)
    ranks[order] = np.arange(init.n_actuators)
    anchor = float(onsets.min())

    x0: list[float] = []
    lo: list[float] = []
    hi: list[float] = []
    names: list[str] = []
    t_max = target.duration
    if cfg.uniform_soa:
        if init.n_actuators > 1:
            soa0 = float(np.diff(np.sort(onsets)).mean())
            x0.append(soa0 if soa0 > 0 else 1e-2)
            lo.append(1e-3)
            hi.append(t_max)
            names.append("soa")
    else:
        x0 += list(onsets)
        lo += [0.0] * init.n_actuators
        hi += [t_max] * init.n_actuators
        names += [f"onset{j}" for j in range(init.n_actuators)]
    durations = [a.duration for a in init.activations]
    if cfg.shared_duration:
        x0.append(float(np.median(durations)))
        lo.append(_DURATION_BOUNDS[0])
        hi.append(_DURATION_BOUNDS[1])
        names.append("duration")
    else:
        x0 += durations
        lo += [_DURATION_BOUNDS[0]] * init.n_actuators
        hi += [_DURATION_BOUNDS[1]] * init.n_actuators
        names += [f"duration{j}" for j in range(init.n_actuators)]
    if cfg.free_carrier_amps:
        amps = list(init.carrier.amplitudes)
        x0 += amps
        lo += [0.0] * len(amps)
        hi += [10.0 * target.peak_value] * len(amps)
        names += [f"carrier_amp{m}" for m in range(len(amps))]
    if not x0:
        raise ValueError("no free parameters; enable at least one block")
    return _ParamSpace(
        cfg=cfg,
        init=init,
        anchor=anchor,
        ranks=ranks,
        lo=np.array(lo),
        hi=np.array(hi),
        x0=np.array(x0),
        names=names,
    )


# --- bounded Nelder-Mead -----------------------------------------------------

def _fold(x: np.ndarray, lo: np.ndarray, hi: np.ndarray) -> np.ndarray:
    """Reflect out-of-bounds coordinates back into [lo, hi]."""
    span = hi - lo
    y = x.copy()
    ok = span > 0
    m = np.mod(y[ok] - lo[ok], 2.0 * span[ok])
    y[ok] = lo[ok] + np.where(m <= span[ok], m, 2.0 * span[ok] - m)
    y[~ok] = lo[~ok]
    return y


class _Evaluator:
    """Budgeted objective wrapper: folds bounds, counts, tracks the best."""

    def __init__(self, fun: Callable[[np.ndarray], float], lo, hi, budget: int):
        self.fun = fun
        self.lo, self.hi = lo, hi
        self.budget = budget
        self.evals = 0
        self.trace: list[float] = []
        self.best_x: np.ndarray | None = None
        self.best_f = np.inf

    def try_eval(self, x: np.ndarray):
        """(folded x, f) for one evaluation, or None once the budget is spent."""
        if self.evals >= self.budget:
            return None
        x = _fold(np.asarray(x, dtype=np.float64), self.lo, self.hi)
        f = float(self.fun(x))
        self.evals += 1
        if f < self.best_f:
            self.best_f, self.best_x = f, x
        self.trace.append(self.best_f)
        return x, f


def _nelder_mead(ev: _Evaluator, seed, steps: np.ndarray, tol: float, allowance: int) -> bool:
    """One simplex descent from an already-evaluated seed vertex.

    Uses at most ``allowance`` further evaluations (and never more than the
    evaluator's global budget). Collapsed simplexes restart at the best vertex
    with half the step. Returns True when the run converged to ``tol``.
    """
    alpha, gamma, rho, sigma = 1.0, 2.0, 0.5, 0.5
    x0 = seed[0]
    n = x0.size
    stop_at = ev.evals + allowance
    scale = np.maximum(np.abs(x0), 1e-12)
    step_factor = 1.0

    def try_eval(x):
        if ev.evals >= stop_at:
            return None
        return ev.try_eval(x)

    simplex = [seed]

    def expand_simplex(center: np.ndarray, factor: float) -> bool:
        for i in range(n):
            x = center.copy()
            x[i] += steps[i] * factor
            got = try_eval(x)
            if got is None:
                return False
            simplex.append(got)
        return True

    alive = expand_simplex(x0, step_factor)
    while alive:
        simplex.sort(key=lambda xf: xf[1])
        f_low, f_high = simplex[0][1], simplex[-1][1]
        if f_high - f_low <= tol * max(abs(f_low), tol):
            return True
        diam = max(
            float(np.max(np.abs(v[0] - simplex[0][0]) / scale)) for v in simplex[1:]
        )
        if diam < 1e-10:
            step_factor *= 0.5
            if step_factor < 1e-6:
                return True  # fully collapsed: nothing left to resolve
            simplex = [min(simplex, key=lambda xf: xf[1])]
            alive = expand_simplex(simplex[0][0], step_factor)
            continue

        centroid = np.mean([v[0] for v in simplex[:-1]], axis=0)
        worst_x = simplex[-1][0]
        got = try_eval(centroid + alpha * (centroid - worst_x))
        if got is None:
            return False
        xr, fr = got
        if fr < simplex[0][1]:
            got = try_eval(centroid + gamma * (centroid - worst_x))
            if got is not None and got[1] < fr:
                simplex[-1] = got
            else:
                simplex[-1] = (xr, fr)
        elif fr < simplex[-2][1]:
            simplex[-1] = (xr, fr)
        else:
            if fr < simplex[-1][1]:
                got = try_eval(centroid + rho * (xr - centroid))
                accept_below = fr
            else:
                got = try_eval(centroid + rho * (worst_x - centroid))
                accept_below = simplex[-1][1]
            if got is None:
                return False
            if got[1] < accept_below:
                simplex[-1] = got
            else:
                # shrink toward the best vertex
                kept = [simplex[0]]
                for v in simplex[1:]:
                    got = try_eval(simplex[0][0] + sigma * (v[0] - simplex[0][0]))
                    if got is None:
                        return False
                    kept.append(got)
                simplex = kept
    return False


def _grid_starts(cfg: FitConfig, space: _ParamSpace, features: TargetFeatures, ev: _Evaluator):
    """Coarse deterministic scan of the onset-spacing/duration plane.

    The alignment step makes the objective nearly scale-free in time, leaving
    a rough valley with interference replicas spaced at the carrier period, so
    a single local descent from a distant start can stall. The scan seeds the
    simplex runs from the most promising spots; its center comes from the
    target's own kinematics (spacing = pitch / measured speed) and measured
    contact durations, not from the caller's init.
    """
    names = space.names
    if "soa" not in names:
        return []
    i_soa = names.index("soa")
    pitch = float(np.diff(space.init.actuator_positions).mean())
    soa_center = pitch / abs(features.kinematics.velocity)
    soa_lo = max(space.lo[i_soa], 0.7 * soa_center)
    soa_hi = min(space.hi[i_soa], 1.3 * soa_center)
    if not soa_hi > soa_lo:
        return []
    soa_grid = np.linspace(soa_lo, soa_hi, 21)

    if "duration" in names:
        i_dur = names.index("duration")
        contact = float(np.median(features.contact_durations))
        d_lo = max(space.lo[i_dur], 0.12 * contact)
        d_hi = min(space.hi[i_dur], contact)
        dur_grid = np.geomspace(d_lo, d_hi, 6) if d_hi > d_lo else [space.x0[i_dur]]
    else:
        i_dur = None
        dur_grid = [None]

    by_soa: list[tuple[float, np.ndarray]] = []
    for soa in soa_grid:
        best_here = None
        for dur in dur_grid:
            theta = space.x0.copy()
            theta[i_soa] = soa
            if i_dur is not None:
                theta[i_dur] = dur
            got = ev.try_eval(theta)
            if got is None:
                break
            if best_here is None or got[1] < best_here[1]:
                best_here = got
        if best_here is not None:
            by_soa.append(best_here)
    by_soa.sort(key=lambda xf: xf[1])
    return by_soa[: cfg.global_starts]


def fit(
    target: Recording,
    cfg: FitConfig = FitConfig(),
    params: PropagationParams = PropagationParams(),
    *,
    init: ActuationSequence | None = None,
    actuator_positions=None,
) -> FitResult:
    """Fit an actuation sequence to a recorded stroke.

    Analyzes the target, builds (or accepts) a starting sequence, then runs
    bounded simplex descents over the parameters freed by ``cfg``: one from
    the init, plus up to ``cfg.global_starts`` from the best points of a
    coarse deterministic spacing/duration scan (the objective's time-scale
    valley holds interference replicas a lone local descent can stall in).
    Everything shares one evaluation budget; deterministic for fixed inputs.
    When the budget runs out first, the best sequence so far is returned with
    ``converged=False``.
    """
    features = analyze_target(target, cfg)
    if actuator_positions is None:
        actuator_positions = features.layout.positions
    if init is None:
        init = heuristic_init(
            features.kinematics, features.envelope, features.spectrum, actuator_positions
        )
    space = _param_space(cfg, init, features)

    cache: dict[bytes, tuple[float, float]] = {}

    def fun(theta: np.ndarray) -> float:
        seq = space.build(theta)
        value, env_term, spec_term = objective_terms(
            seq,
            features.aligned,
            features.spectrum,
            params,
            features.layout,
            features.sample_rate,
            cfg,
            duration=features.duration,
        )
        cache[theta.tobytes()] = (env_term, spec_term)
        return value

    ev = _Evaluator(fun, space.lo, space.hi, cfg.budget)
    seeds = []
    first = ev.try_eval(space.x0)
    if first is not None:
        seeds.append(first)
        if cfg.global_starts > 0:
            seeds.extend(_grid_starts(cfg, space, features, ev))

    converged = False
    for k, seed in enumerate(seeds):
        runs_left = len(seeds) - k
        remaining = cfg.budget - ev.evals
        allowance = remaining // runs_left if runs_left > 1 else remaining
        if allowance <= 0:
            break
        steps = np.maximum(np.abs(seed[0]), 1e-3) * cfg.init_step
        f_before = ev.best_f
        run_converged = _nelder_mead(ev, seed, steps, cfg.tol, allowance)
        # the overall flag belongs to whichever run owns the global best
        if ev.best_f < f_before or np.array_equal(seed[0], ev.best_x):
            converged = run_converged

    env_term, spec_term = cache[ev.best_x.tobytes()]
    return FitResult(
        sequence=space.build(ev.best_x),
        objective=ev.best_f,
        envelope_term=env_term,
        spectrum_term=spec_term,
        evaluations=ev.evals,
        converged=converged,
        trace=tuple(ev.trace),
    )
