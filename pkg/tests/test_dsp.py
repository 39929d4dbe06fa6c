import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy.special import i0 as scipy_i0

from strokekit import dsp
from strokekit.dsp import FrameSpec
from strokekit.errors import EmptyInputError, NonMonotonicPeaksError, TooShortError
from strokekit.model import Envelope, Recording

from conftest import make_recording, sine


class TestDetrend:
    def test_constant_becomes_zero(self):
        out = dsp.detrend(np.full(100, 3.7))
        assert np.allclose(out, 0.0, atol=1e-12)

    def test_ramp_becomes_zero(self):
        t = np.arange(200)
        out = dsp.detrend(1.5 + 0.25 * t)
        assert np.allclose(out, 0.0, atol=1e-9)

    def test_sinusoid_plus_ramp_recovers_sinusoid(self):
        # 250 whole periods of 125 Hz at 2 kHz, symmetric about the series
        # center so the sinusoid carries no linear trend of its own
        n = 4000
        t = np.arange(n)
        s = np.cos(2 * np.pi * 125.0 / 2000.0 * (t - (n - 1) / 2))
        out = dsp.detrend(s + 2.0 + 0.003 * t)
        rms_err = np.sqrt(np.mean((out - s) ** 2))
        assert rms_err <= 1e-6

    def test_output_mean_and_slope_vanish(self):
        rng = np.random.default_rng(0)
        x = rng.normal(size=501) + 5.0 + 0.01 * np.arange(501)
        out = dsp.detrend(x)
        rms = np.sqrt(np.mean(x**2))
        t = np.arange(501) - 250.0
        assert abs(out.mean()) <= 1e-9 * rms
        assert abs((t @ out) / (t @ t)) <= 1e-9 * rms

    def test_idempotent(self):
        rng = np.random.default_rng(1)
        x = rng.normal(size=300)
        once = dsp.detrend(x)
        twice = dsp.detrend(once)
        assert np.max(np.abs(twice - once)) <= 1e-12 * np.sqrt(np.mean(x**2))

    def test_too_short(self):
        with pytest.raises(TooShortError):
            dsp.detrend(np.array([1.0]))


class TestAxisMagnitude:
    def test_constant_axes_vanish(self):
        rec = Recording(channels=np.broadcast_to(
            np.array([3.0, 4.0, 0.0])[None, :, None], (6, 3, 50)).copy())
        mags = dsp.axis_magnitude(rec)
        assert np.allclose(mags, 0.0, atol=1e-12)

    def test_single_axis_gives_absolute_value(self):
        s = dsp.detrend(sine(100.0, 400))
        channels = np.zeros((6, 3, 400))
        channels[:, 0, :] = s
        rec = Recording(channels=channels)
        mags = dsp.axis_magnitude(rec)
        assert np.allclose(mags[2], np.abs(s), atol=1e-9)

    def test_equal_axes_gain_sqrt3(self):
        s = dsp.detrend(sine(100.0, 400))
        channels = np.broadcast_to(s, (6, 3, 400)).copy()
        rec = Recording(channels=channels)
        mags = dsp.axis_magnitude(rec)
        assert np.allclose(mags[0], np.abs(s) * np.sqrt(3.0), atol=1e-9)


class TestRmsEnvelope:
    def test_sine_rms_is_amplitude_over_sqrt2(self):
        env = dsp.rms_envelope(sine(125.0, 4000), 2000.0)  # 400-sample window
        assert np.all(np.abs(env - 0.70711) <= 1e-3)

    def test_zero_series(self):
        env = dsp.rms_envelope(np.zeros(1000), 2000.0)
        assert (env == 0).all()

    def test_length_formula(self):
        env = dsp.rms_envelope(np.zeros(1000), 2000.0, window_len=0.2, hop=7)
        assert env.size == (1000 - 400) // 7 + 1

    def test_power_of_two_scaling_exact(self):
        rng = np.random.default_rng(2)
        x = rng.normal(size=900)
        a = dsp.rms_envelope(2.0 * x, 2000.0)
        b = 2.0 * dsp.rms_envelope(x, 2000.0)
        assert np.array_equal(a, b)

    @given(st.floats(min_value=0.01, max_value=100.0, allow_nan=False))
    @settings(max_examples=30, deadline=None)
    def test_homogeneity(self, alpha):
        rng = np.random.default_rng(8)
        x = rng.normal(size=600)
        a = dsp.rms_envelope(alpha * x, 2000.0)
        b = alpha * dsp.rms_envelope(x, 2000.0)
        assert np.allclose(a, b, rtol=1e-12, atol=0)

    def test_too_short(self):
        with pytest.raises(TooShortError):
            dsp.rms_envelope(np.zeros(399), 2000.0)


class TestKaiserWindow:
    def test_beta_zero_is_rectangular(self):
        assert np.array_equal(dsp.kaiser_window(64, 0.0), np.ones(64))

    def test_exactly_symmetric(self):
        for n in (8, 65, 128):
            w = dsp.kaiser_window(n, 8.0)
            assert np.array_equal(w, w[::-1])

    def test_endpoint_is_reciprocal_bessel(self):
        w = dsp.kaiser_window(128, 8.0)
        i0_8 = float(scipy_i0(8.0))  # independent oracle
        assert i0_8 == pytest.approx(427.56, abs=0.01)
        assert w[0] == pytest.approx(1.0 / i0_8, rel=1e-9)

    def test_series_bessel_matches_scipy(self):
        for x in (0.0, 0.5, 3.0, 8.0, 20.0):
            assert dsp._bessel_i0(x) == pytest.approx(float(scipy_i0(x)), rel=1e-10)

    def test_max_at_center_and_all_in_unit_interval(self):
        w = dsp.kaiser_window(128, 8.0)
        assert (w > 0).all() and (w <= 1.0).all()
        assert np.argmax(w) in (63, 64)


class TestFrameSpec:
    def test_defaults(self):
        spec = FrameSpec()
        assert spec.n_fft == 128 and spec.window == "kaiser"
        assert spec.beta == 8.0 and spec.hop == 1

    def test_rejects_bad_sizes(self):
        with pytest.raises(ValueError):
            FrameSpec(n_fft=100)
        with pytest.raises(ValueError):
            FrameSpec(n_fft=4)
        with pytest.raises(ValueError):
            FrameSpec(hop=0)
        with pytest.raises(ValueError):
            FrameSpec(window="hann")


class TestPowerSpectrumFrames:
    def test_zero_input(self):
        psd, freqs = dsp.power_spectrum_frames(np.zeros(500), 2000.0)
        assert (psd == 0).all()

    def test_default_bins_cover_0_to_500(self):
        _, freqs = dsp.power_spectrum_frames(np.zeros(500), 2000.0)
        assert freqs.size == 33
        assert freqs[1] == 15.625
        assert freqs[-1] == 500.0

    def test_sine_peaks_at_bin_8_in_every_frame(self):
        psd, freqs = dsp.power_spectrum_frames(sine(125.0, 2000), 2000.0)
        assert freqs[8] == 125.0
        assert (np.argmax(psd, axis=1) == 8).all()

    def test_parseval_per_frame(self):
        rng = np.random.default_rng(11)
        x = rng.normal(size=700)
        spec = FrameSpec()
        psd, freqs = dsp.power_spectrum_frames(x, 2000.0, spec, max_freq=None)
        w = spec.weights()
        df = 2000.0 / spec.n_fft
        wsq = float(w @ w)
        for f in range(psd.shape[0]):
            frame = x[f : f + spec.n_fft] * w
            lhs = psd[f].sum() * df
            rhs = np.mean(frame**2) * spec.n_fft / wsq
            assert abs(lhs - rhs) <= 1e-9 * rhs

    def test_too_short(self):
        with pytest.raises(TooShortError):
            dsp.power_spectrum_frames(np.zeros(100), 2000.0)


class TestAggregateSpectra:
    def test_two_member_population_moments(self):
        # one recording, two channels, exactly one frame each: members p and q
        layout_series = [sine(125.0, 128), sine(250.0, 128, amp=0.5)]
        rec = make_recording(layout_series)
        stats = dsp.aggregate_spectra([rec])
        p, _ = dsp.power_spectrum_frames(rec.channels[0, 0], 2000.0)
        for ax in (1, 2):
            p = p + dsp.power_spectrum_frames(rec.channels[0, ax], 2000.0)[0]
        q, _ = dsp.power_spectrum_frames(rec.channels[1, 0], 2000.0)
        for ax in (1, 2):
            q = q + dsp.power_spectrum_frames(rec.channels[1, ax], 2000.0)[0]
        assert stats.frame_count == 2
        assert np.allclose(stats.mean, (p[0] + q[0]) / 2, rtol=1e-12)
        assert np.allclose(stats.std, np.abs(p[0] - q[0]) / 2, rtol=1e-9, atol=1e-15)

    def test_identical_population_members_have_zero_std(self):
        # 125 Hz at 2 kHz repeats every 16 samples; hop=16 makes every frame
        # of every channel literally identical
        s = sine(125.0, 1024)
        rec = make_recording([s] * 6)
        stats = dsp.aggregate_spectra([rec], FrameSpec(hop=16))
        assert stats.std.max() <= 1e-9

    def test_frame_count_closed_form(self):
        rng = np.random.default_rng(5)
        spec = FrameSpec(hop=7)
        recs = []
        total = 0
        for length in (300, 500, 777):
            recs.append(make_recording(list(rng.normal(size=(4, length)))))
            total += 4 * ((length - 128) // 7 + 1)
        stats = dsp.aggregate_spectra(recs, spec)
        assert stats.frame_count == total

    def test_permutation_invariant(self):
        rng = np.random.default_rng(6)
        recs = [make_recording(list(rng.normal(size=(3, 400)))) for _ in range(4)]
        a = dsp.aggregate_spectra(recs)
        b = dsp.aggregate_spectra(recs[::-1])
        assert np.allclose(a.mean, b.mean, rtol=1e-12)
        assert np.allclose(a.std, b.std, rtol=1e-9, atol=1e-18)
        assert a.frame_count == b.frame_count

    def test_empty_input(self):
        with pytest.raises(EmptyInputError):
            dsp.aggregate_spectra([])

    def test_mixed_rates_rejected(self):
        a = make_recording([np.zeros(300)] * 2)
        b = make_recording([np.zeros(300)] * 2, sample_rate=1000.0)
        with pytest.raises(ValueError):
            dsp.aggregate_spectra([a, b])


def gaussian_bump_envelope(centers, width, rate, n, window_len=0.0):
    t = np.arange(n) / rate + window_len / 2
    rows = [np.exp(-0.5 * ((t - c) / width) ** 2) for c in centers]
    return Envelope(per_channel=np.stack(rows), sample_rate=rate,
                    window_len=window_len, hop=1)


class TestAlignEnvelopes:
    def test_identity_mapping(self):
        centers = np.linspace(0.0, 1.0, 6)
        env = gaussian_bump_envelope(centers, 0.15, 255.0, 256)
        aligned = dsp.align_envelopes(env, centers)
        assert aligned.n_points == 256
        assert np.max(np.abs(aligned.per_channel - env.per_channel)) <= 1e-6

    def test_time_shift_invariance(self):
        centers = np.linspace(0.5, 1.5, 6)
        a = gaussian_bump_envelope(centers, 0.1, 1000.0, 2500)
        b = gaussian_bump_envelope(centers + 0.4, 0.1, 1000.0, 2500)
        al_a = dsp.align_envelopes(a, centers)
        al_b = dsp.align_envelopes(b, centers + 0.4)
        assert np.max(np.abs(al_a.per_channel - al_b.per_channel)) <= 1e-6

    def test_time_scale_invariance(self):
        centers = np.linspace(0.5, 1.5, 6)
        a = gaussian_bump_envelope(centers, 0.1, 1000.0, 2500)
        b = gaussian_bump_envelope(0.2 + 2 * centers, 0.2, 1000.0, 5000)
        al_a = dsp.align_envelopes(a, centers)
        al_b = dsp.align_envelopes(b, 0.2 + 2 * centers)
        assert np.max(np.abs(al_a.per_channel - al_b.per_channel)) <= 1e-4

    def test_reverse_stroke_is_flipped_onto_canonical_axis(self):
        # reverse stroke: channel 0 (first position) peaks last in time
        centers = np.linspace(1.5, 0.5, 6)
        env = gaussian_bump_envelope(centers, 0.1, 1000.0, 2500)
        aligned = dsp.align_envelopes(env, centers)
        assert np.argmax(aligned.per_channel[0]) == 0
        assert np.argmax(aligned.per_channel[5]) == aligned.n_points - 1

    def test_non_monotonic_peaks_rejected(self):
        env = gaussian_bump_envelope(np.linspace(0.5, 1.5, 4), 0.1, 1000.0, 2500)
        with pytest.raises(NonMonotonicPeaksError):
            dsp.align_envelopes(env, [0.5, 0.9, 0.7, 1.5])
