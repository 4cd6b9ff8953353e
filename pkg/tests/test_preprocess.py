import numpy as np
import pytest

from cardiomix.core import BG, ArgumentError, EcgRecord, labels_from_string
from cardiomix.preprocess import (
    bandpass,
    fix_duration,
    preprocess_pipeline,
    resample,
    resample_labels,
    zscore,
)
from cardiomix.rng import Stream


def sinusoid(freq_hz, rate, seconds, amp=1.0):
    t = np.arange(int(round(seconds * rate))) / rate
    return amp * np.sin(2 * np.pi * freq_hz * t)


def fitted_amplitude(x, freq_hz, rate, settle_s=1.0):
    """Least-squares amplitude of a sinusoid at freq_hz over the interior."""
    n0 = int(settle_s * rate)
    seg = x[n0:x.size - n0]
    t = (np.arange(x.size) / rate)[n0:x.size - n0]
    c = np.cos(2 * np.pi * freq_hz * t)
    s = np.sin(2 * np.pi * freq_hz * t)
    a = 2 * np.mean(seg * c)
    b = 2 * np.mean(seg * s)
    return float(np.hypot(a, b))


class TestResample:
    def test_halving_length(self):
        rec = EcgRecord("r", "II", 500, np.zeros(5000))
        out = resample(rec, 250)
        assert out.length == 2500 and out.sample_rate == 250

    def test_identity_at_same_rate(self):
        rec = EcgRecord("r", "II", 250, np.arange(100, dtype=float))
        out = resample(rec, 250)
        assert np.array_equal(out.samples, rec.samples)

    def test_sinusoid_amplitude_preserved(self):
        # oracle: the analytically sampled 5 Hz sinusoid at 250 Hz has amp 1
        rec = EcgRecord("r", "II", 1000, sinusoid(5, 1000, 10))
        out = resample(rec, 250)
        assert out.length == 2500
        amp = fitted_amplitude(out.samples, 5, 250)
        assert abs(amp - 1.0) <= 0.02

    def test_rejects_zero_rate(self):
        rec = EcgRecord("r", "II", 250, np.zeros(10))
        with pytest.raises(ArgumentError):
            resample(rec, 0)

    def test_label_resampling_nearest(self):
        labels = labels_from_string("00112233")
        out = resample_labels(labels, 8, 4)
        # positions 0, 2, 4, 6
        assert out.tolist() == [0, 1, 2, 3]


class TestBandpass:
    def test_dc_rejection(self):
        rec = EcgRecord("r", "II", 250, np.full(2500, 5.0))
        out = bandpass(rec)
        settle = 250
        assert np.abs(out.samples[settle:-settle]).max() < 1e-3 * 5.0

    def test_passband_gain_10hz(self):
        rec = EcgRecord("r", "II", 250, sinusoid(10, 250, 10))
        out = bandpass(rec)
        amp = fitted_amplitude(out.samples, 10, 250)
        gain_db = 20 * np.log10(amp)
        assert abs(gain_db) <= 1.0

    def test_baseline_wander_attenuated(self):
        rec = EcgRecord("r", "II", 250, sinusoid(0.05, 250, 60))
        out = bandpass(rec)
        amp = fitted_amplitude(out.samples, 0.05, 250, settle_s=5.0)
        assert 20 * np.log10(max(amp, 1e-12)) <= -20.0

    def test_rejects_hi_at_nyquist(self):
        rec = EcgRecord("r", "II", 80, np.zeros(800))
        with pytest.raises(ArgumentError):
            bandpass(rec, 0.67, 40.0)

    def test_linearity(self):
        st = Stream(5)
        x = st.normal_block(2500)
        y = st.normal_block(2500)
        rec = lambda v: EcgRecord("r", "II", 250, v)
        lhs = bandpass(rec(2.0 * x + 3.0 * y)).samples
        rhs = 2.0 * bandpass(rec(x)).samples + 3.0 * bandpass(rec(y)).samples
        scale = np.abs(rhs).max()
        assert np.abs(lhs - rhs).max() <= 1e-6 * max(scale, 1.0)


class TestZscore:
    def test_basic(self):
        out = zscore(EcgRecord("r", "II", 250, [1.0, 2.0, 3.0]))
        assert abs(out.samples.mean()) < 1e-9
        assert abs(out.samples.std() - 1.0) < 1e-9

    def test_constant_becomes_zero(self):
        out = zscore(EcgRecord("r", "II", 250, [5.0, 5.0, 5.0]))
        assert np.array_equal(out.samples, np.zeros(3))

    def test_random_moments(self):
        stream = Stream(9)
        for trial in range(50):
            x = stream.child(trial).normal_block(200) * 3.0 + 7.0
            out = zscore(EcgRecord("r", "II", 250, x))
            assert abs(out.samples.mean()) < 1e-9
            assert abs(out.samples.std() - 1.0) < 1e-9


class TestFixDuration:
    def test_crop_keeps_head(self):
        rec = EcgRecord("r", "II", 250, np.arange(3000, dtype=float))
        out, _ = fix_duration(rec)
        assert out.length == 2500
        assert np.array_equal(out.samples, np.arange(2500, dtype=float))

    def test_pad_with_zeros_and_bg(self):
        rec = EcgRecord("r", "II", 250, np.ones(2000))
        labels = np.full(2000, 2, dtype=np.int64)
        out, lab = fix_duration(rec, labels)
        assert out.length == 2500 and lab.size == 2500
        assert np.all(out.samples[2000:] == 0.0)
        assert np.all(lab[2000:] == BG)
        assert np.all(lab[:2000] == 2)

    def test_identity(self):
        rec = EcgRecord("r", "II", 250, np.ones(2500))
        out, _ = fix_duration(rec)
        assert out is rec


class TestPipeline:
    def test_end_to_end_shape_and_moments(self):
        st = Stream(1)
        rec = EcgRecord("r", "II", 500, sinusoid(7, 500, 12) + 0.1 * st.normal_block(6000))
        out, _ = preprocess_pipeline(rec)
        assert out.sample_rate == 250 and out.length == 2500
        assert abs(out.samples.mean()) < 1e-9
        assert abs(out.samples.std() - 1.0) < 1e-9

    def test_conforming_record_only_filtered(self):
        rec = EcgRecord("r", "II", 250, sinusoid(9, 250, 10))
        out, _ = preprocess_pipeline(rec)
        expected = zscore(bandpass(rec))
        assert np.array_equal(out.samples, expected.samples)

    def test_all_bg_labels_stay_bg(self):
        rec = EcgRecord("r", "II", 250, sinusoid(9, 250, 4))
        labels = np.zeros(1000, dtype=np.int64)
        out, lab = preprocess_pipeline(rec, labels)
        assert lab.size == 2500
        assert np.all(lab == BG)

    def test_label_length_tracks_signal(self):
        for rate, seconds in ((500, 12.0), (200, 7.0), (250, 10.0)):
            n = int(rate * seconds)
            rec = EcgRecord("r", "II", rate, np.sin(np.arange(n) / 7.0))
            labels = np.zeros(n, dtype=np.int64)
            labels[n // 3:n // 2] = 2
            out, lab = preprocess_pipeline(rec, labels)
            assert out.length == lab.size == 2500
