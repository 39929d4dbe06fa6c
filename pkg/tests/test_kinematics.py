import numpy as np
import pytest

from strokekit import kinematics as kin
from strokekit.dsp import envelope_of_recording
from strokekit.errors import FlatChannelError, ZeroTimeSpreadError
from strokekit.model import CarrierSpec, ChannelLayout, Envelope, PropagationParams
from strokekit.propagation import StrokeModel, simulate_stroke


def env_from_rows(rows, rate=2000.0, window_len=0.2):
    return Envelope(per_channel=np.asarray(rows, dtype=float), sample_rate=rate,
                    window_len=window_len, hop=1)


def triangle(n, peak_idx):
    up = np.linspace(0.0, 1.0, peak_idx + 1)
    down = np.linspace(1.0, 0.0, n - peak_idx)[1:]
    return np.concatenate([up, down])


class TestDetectPeaks:
    def test_window_center_convention(self):
        env = env_from_rows([triangle(1000, 300)])
        [(t, v)] = kin.detect_peaks(env)
        assert t == pytest.approx(300 / 2000 + 0.1)  # 0.250 s
        assert v == 1.0

    def test_flat_channel(self):
        env = env_from_rows([np.zeros(100)])
        with pytest.raises(FlatChannelError):
            kin.detect_peaks(env)
        peaks = kin.detect_peaks(env, strict=False)
        assert peaks[0][1] == 0.0

    def test_tie_breaks_to_earlier(self):
        row = np.zeros(100)
        row[[30, 60]] = 1.0
        env = env_from_rows([row])
        [(t, _)] = kin.detect_peaks(env)
        assert t == pytest.approx(30 / 2000 + 0.1)


class TestEstimateKinematics:
    def _peaks(self, times):
        return [(t, 1.0) for t in times]

    def test_uniform_forward_stroke(self):
        layout = ChannelLayout()
        k = kin.estimate_kinematics(self._peaks([0.1, 0.2, 0.3, 0.4, 0.5, 0.6]), layout)
        assert k.velocity == pytest.approx(0.2, rel=1e-12)
        assert k.r_squared == pytest.approx(1.0, abs=1e-12)
        assert k.uniformity == pytest.approx(0.0, abs=1e-9)
        assert k.duration == pytest.approx(0.5)
        assert k.warnings == ()

    def test_reversed_stroke_flips_sign_only(self):
        layout = ChannelLayout()
        fwd = kin.estimate_kinematics(self._peaks([0.1, 0.2, 0.3, 0.4, 0.5, 0.6]), layout)
        rev = kin.estimate_kinematics(self._peaks([0.6, 0.5, 0.4, 0.3, 0.2, 0.1]), layout)
        assert rev.velocity == pytest.approx(-fwd.velocity)
        assert rev.r_squared == pytest.approx(fwd.r_squared)
        assert rev.uniformity == pytest.approx(fwd.uniformity)
        assert rev.duration == pytest.approx(fwd.duration)

    def test_simultaneous_peaks(self):
        with pytest.raises(ZeroTimeSpreadError):
            kin.estimate_kinematics(self._peaks([0.3] * 6), ChannelLayout())

    def test_time_shift_invariance(self):
        layout = ChannelLayout()
        times = np.array([0.11, 0.21, 0.33, 0.41, 0.52, 0.60])
        a = kin.estimate_kinematics(self._peaks(times), layout)
        b = kin.estimate_kinematics(self._peaks(times + 5.0), layout)
        assert b.velocity == pytest.approx(a.velocity, rel=1e-9)
        assert b.r_squared == pytest.approx(a.r_squared, rel=1e-9)
        assert b.uniformity == pytest.approx(a.uniformity, rel=1e-9)

    def test_non_monotonic_flags_warning(self):
        k = kin.estimate_kinematics(
            self._peaks([0.1, 0.3, 0.2, 0.4, 0.5, 0.6]), ChannelLayout()
        )
        assert any("non-monotonic" in w for w in k.warnings)


class TestStrokeDurations:
    def test_rectangular_pulse(self):
        row = np.zeros(3000)
        row[400:1400] = 2.0  # 0.5 s at 2 kHz
        env = env_from_rows([row])
        d = kin.stroke_duration_per_channel(env)
        assert abs(d[0] - 0.5) <= 1 / 2000

    def test_zero_threshold_spans_positive_support(self):
        env = env_from_rows([np.ones(500)])
        d = kin.stroke_duration_per_channel(env, threshold_fraction=0.0)
        assert d[0] == pytest.approx(500 / 2000)

    def test_raised_cosine_crossing_width(self):
        # h(t) = 0.5*(1 - cos(2*pi*t/D)): h = 0.1*peak at
        # t = D*arccos(0.8)/(2*pi), so the supra-threshold width is
        # D*(1 - arccos(0.8)/pi)
        rate, dur = 2000.0, 1.2
        n = int(dur * rate) + 1
        t = np.arange(n) / rate
        row = 0.5 * (1 - np.cos(2 * np.pi * t / dur))
        env = env_from_rows([row])
        d = kin.stroke_duration_per_channel(env, threshold_fraction=0.1)
        want = dur * (1 - np.arccos(0.8) / np.pi)
        assert abs(d[0] - want) <= 1 / rate

    def test_longest_run_wins(self):
        row = np.zeros(1000)
        row[100:200] = 1.0
        row[300:700] = 1.0
        env = env_from_rows([row])
        d = kin.stroke_duration_per_channel(env)
        assert d[0] == pytest.approx(400 / 2000)

    def test_flat_channel(self):
        with pytest.raises(FlatChannelError):
            kin.stroke_duration_per_channel(env_from_rows([np.zeros(10)]))


class TestSimulatorRecovery:
    @pytest.mark.parametrize("velocity", [0.08, -0.2])
    def test_velocity_within_five_percent(self, velocity):
        carrier = CarrierSpec(((125.0, 1.0),))
        if velocity > 0:
            model = StrokeModel(velocity=velocity, start_pos=-0.1, end_pos=0.2,
                                ramp_fraction=0.1, carrier=carrier, seed=2)
        else:
            model = StrokeModel(velocity=velocity, start_pos=0.2, end_pos=-0.1,
                                ramp_fraction=0.1, carrier=carrier, seed=2)
        rec = simulate_stroke(model, PropagationParams())
        env = envelope_of_recording(rec)
        k = kin.estimate_kinematics(kin.detect_peaks(env), rec.layout)
        assert abs(abs(k.velocity) - abs(velocity)) <= 0.05 * abs(velocity)
        assert np.sign(k.velocity) == np.sign(velocity)
        assert k.r_squared >= 0.99
