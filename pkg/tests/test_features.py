"""
Tests for log-mel features, augmentation and audio IO
"""

import importlib

import numpy as np
import pytest
from scipy.io import wavfile

from src.errors import ConfigError, DataError
from src.features import (
    DEFAULT_FILTERBANK, AugmentConfig, FilterbankConfig, Waveform, add_noise, add_reverb,
    apply_freq_mask, apply_time_mask, augment, augmented_features, cmn, crop_or_pad, load_features,
    logmel, mel_filterbank, num_frames, read_wav, save_features, synthetic_rir, utterance_features,
    write_wav,
)
from src.features.filterbank import hz_to_mel, mel_to_hz

augment_module = importlib.import_module("src.features.augment")


def _sine(freq_hz: float, seconds: float = 1.0, sr: int = 16000) -> Waveform:
    t = np.arange(int(seconds * sr)) / sr
    return Waveform(0.5 * np.sin(2 * np.pi * freq_hz * t), sr)


class TestLogmel:

    def test_two_seconds_frame_count(self):
        feats = logmel(_sine(440.0, 2.0))
        assert feats.shape == (198, 80)
        assert num_frames(32000) == 198

    def test_silence_is_log_floor(self):
        feats = logmel(Waveform(np.zeros(16000)))
        np.testing.assert_allclose(feats, np.log(DEFAULT_FILTERBANK.log_floor), rtol=1e-6)

    def test_sine_peak_bin(self):
        feats = logmel(_sine(1000.0))
        fb = mel_filterbank(80, 512, 16000, 20.0, 8000.0)
        centers = mel_to_hz(np.linspace(hz_to_mel(20.0), hz_to_mel(8000.0), 82))[1:-1]
        expected = int(np.argmin(np.abs(centers - 1000.0)))
        peaks = np.argmax(feats, axis=1)
        assert np.all(np.abs(peaks - expected) <= 1)
        assert peaks.max() - peaks.min() <= 1
        assert fb.shape == (80, 257)

    def test_deterministic(self):
        w = _sine(300.0)
        assert np.array_equal(logmel(w), logmel(w))

    def test_too_short(self):
        with pytest.raises(DataError):
            logmel(Waveform(np.ones(100)))

    def test_rate_mismatch(self):
        with pytest.raises(DataError):
            logmel(Waveform(np.ones(8000), sample_rate=8000))

    def test_filterbank_is_read_only(self):
        fb = mel_filterbank(80, 512, 16000, 20.0, 8000.0)
        with pytest.raises(ValueError):
            fb[0, 0] = 1.0

    def test_invalid_mel_range(self):
        with pytest.raises(ConfigError):
            mel_filterbank(80, 512, 16000, 20.0, 9000.0)

    def test_config_from_dict(self):
        cfg = FilterbankConfig.from_dict({"n_mels": 40, "f_max": None, "unused": 1})
        assert cfg.n_mels == 40 and cfg.upper_hz == 8000.0
        assert (cfg.window, cfg.hop) == (400, 160)


class TestCmn:

    def test_constant_matrix(self):
        assert np.all(cmn(np.full((5, 3), 2.5)) == 0)

    def test_hand_arithmetic(self):
        np.testing.assert_allclose(cmn(np.array([[1.0], [3.0]])), [[-1.0], [1.0]])

    def test_zero_mean_unchanged(self):
        f = np.array([[1.0, -2.0], [-1.0, 2.0]])
        np.testing.assert_allclose(cmn(f), f)

    def test_means_vanish(self):
        f = logmel(_sine(700.0))
        assert np.max(np.abs(cmn(f).mean(axis=0))) < 1e-5

    def test_all_zero_waveform_rejected(self):
        with pytest.raises(DataError):
            utterance_features(Waveform(np.zeros(16000)))


class TestCropOrPad:

    def test_identity(self, rng):
        f = rng.standard_normal((198, 4))
        np.testing.assert_array_equal(crop_or_pad(f, 198, rng), f)

    def test_wrap_around(self, rng):
        f = np.arange(100, dtype=np.float32)[:, None]
        out = crop_or_pad(f, 198, rng)
        assert out.shape == (198, 1)
        np.testing.assert_array_equal(out[100:, 0], np.arange(98))

    def test_contiguous_crop(self, rng):
        f = np.arange(300, dtype=np.float32)[:, None]
        out = crop_or_pad(f, 198, rng)[:, 0]
        assert np.all(np.diff(out) == 1)
        assert 0 <= out[0] <= 102

    @pytest.mark.parametrize("frames", [1, 7, 50, 199, 400])
    def test_frame_count(self, rng, frames):
        assert crop_or_pad(rng.standard_normal((frames, 3)), 198, rng).shape[0] == 198

    def test_invalid(self, rng):
        with pytest.raises(ConfigError):
            crop_or_pad(np.ones((3, 2)), 0, rng)
        with pytest.raises(DataError):
            crop_or_pad(np.ones((0, 2)), 5, rng)


class TestAugment:

    def test_infinite_snr_is_identity(self, rng):
        w = _sine(200.0)
        np.testing.assert_array_equal(add_noise(w, float("inf"), rng).samples, w.samples)

    def test_zero_db_noise_power(self, rng):
        w = _sine(200.0, 2.0)
        noisy = add_noise(w, 0.0, rng)
        noise = noisy.samples.astype(np.float64) - w.samples
        ratio = np.mean(noise ** 2) / np.mean(w.samples.astype(np.float64) ** 2)
        assert ratio == pytest.approx(1.0, rel=0.05)

    def test_freq_mask_width(self, rng):
        f = rng.standard_normal((30, 80)) + 5.0
        out = apply_freq_mask(f, 10, rng, width=4)
        masked = np.argwhere(np.all(out == 0, axis=0)).ravel()
        assert np.sum(out == 0) == 4 * 30
        assert masked.size == 4 and np.all(np.diff(masked) == 1)

    def test_time_mask_within_max(self, rng):
        f = rng.standard_normal((50, 8)) + 5.0
        for _ in range(20):
            rows = np.argwhere(np.all(apply_time_mask(f, 20, rng) == 0, axis=1)).ravel()
            assert 1 <= rows.size <= 20 and np.all(np.diff(rows) == 1)

    def test_mask_max_must_be_below_dimension(self, rng):
        with pytest.raises(ConfigError):
            apply_freq_mask(np.ones((10, 8)), 8, rng)

    def test_reverb_keeps_length_and_peak(self, rng):
        w = _sine(300.0)
        wet = add_reverb(w, 150.0, rng)
        assert wet.samples.shape == w.samples.shape
        assert np.max(np.abs(wet.samples)) == pytest.approx(np.max(np.abs(w.samples)), rel=1e-5)

    def test_rir_starts_with_unit_impulse(self, rng):
        rir = synthetic_rir(100.0, 16000, rng)
        assert rir[0] == 1.0 and rir.shape == (1600,)
        assert np.abs(rir[-100:]).max() < np.abs(rir[1:100]).max()

    def test_augment_requires_generator(self):
        with pytest.raises(TypeError):
            augment(_sine(250.0))

    def test_zero_width_mask_warns(self, rng, monkeypatch):
        warnings = []
        monkeypatch.setattr(augment_module.logger, "warning", warnings.append)
        f = rng.standard_normal((30, 80))
        np.testing.assert_array_equal(apply_freq_mask(f, 10, rng, width=0), f)
        np.testing.assert_array_equal(apply_time_mask(f, 10, rng, width=0), f)
        assert len(warnings) == 2 and all("width 0" in m for m in warnings)

    def test_single_frame_skips_time_mask_with_warning(self, monkeypatch):
        warnings = []
        monkeypatch.setattr(augment_module.logger, "warning", warnings.append)
        w = Waveform(_sine(250.0).samples[:DEFAULT_FILTERBANK.window], 16000)
        for seed in range(60):
            assert augmented_features(w, np.random.default_rng(seed)).shape == (1, 80)
        assert warnings and all("no room for a time mask" in m for m in warnings)

    def test_augment_outputs(self):
        w = _sine(250.0)
        kinds = set()
        for seed in range(12):
            out = augment(w, np.random.default_rng(seed), AugmentConfig())
            kinds.add("waveform" if isinstance(out, Waveform) else "features")
            feats = augmented_features(w, np.random.default_rng(seed), AugmentConfig())
            assert feats.shape == (num_frames(16000), 80)
        assert kinds == {"waveform", "features"}

    def test_invalid_config(self):
        with pytest.raises(ConfigError):
            AugmentConfig(snr_db_range=(10.0, 10.0))
        with pytest.raises(ConfigError):
            AugmentConfig(rir_decay_ms=0.0)


class TestAudioIO:

    def test_wav_round_trip(self, tmp_path):
        w = _sine(440.0)
        write_wav(tmp_path / "a" / "x.wav", w)
        back = read_wav(tmp_path / "a" / "x.wav")
        np.testing.assert_array_equal(back.samples, w.samples)

    def test_int16_scaled(self, tmp_path):
        wavfile.write(str(tmp_path / "pcm.wav"), 16000, np.array([0, 16384, -32768], dtype=np.int16))
        np.testing.assert_allclose(read_wav(tmp_path / "pcm.wav").samples, [0.0, 0.5, -1.0])

    def test_wrong_rate(self, tmp_path):
        wavfile.write(str(tmp_path / "low.wav"), 8000, np.zeros(800, dtype=np.float32))
        with pytest.raises(DataError):
            read_wav(tmp_path / "low.wav")

    def test_feature_cache(self, tmp_path, rng):
        f = rng.standard_normal((12, 80)).astype(np.float32)
        save_features(tmp_path / "f.bin", f)
        assert (tmp_path / "f.bin").read_bytes()[:8] == b"AASVFEAT"
        np.testing.assert_array_equal(load_features(tmp_path / "f.bin"), f)

    def test_feature_cache_bad_magic(self, tmp_path):
        (tmp_path / "bad.bin").write_bytes(b"NOTAFEAT" + bytes(12))
        with pytest.raises(DataError):
            load_features(tmp_path / "bad.bin")
