"""
Tests for the synthetic corpus: speakers, synthesis, splits and trial lists
"""

import numpy as np
import pytest

from src.corpus import (
    CorpusConfig, CorpusLoader, Manifest, ManifestEntry, Trial, TrialList, UtteranceSpec,
    apply_envelope, build_splits, build_trials, gen_speaker, generate_corpus, generate_speakers,
    severity_band, syllable_plan, synth_utterance,
)
from src.corpus.speakers import SEVERITY_BANDS
from src.errors import DataError, PrerequisiteError
from src.features import read_wav, utterance_features


def _corpus(adults=20, children=20, utterances=6, test_fraction=0.25, **kw) -> CorpusConfig:
    return CorpusConfig(adult_speakers=adults, child_speakers=children, utterances_per_speaker=utterances,
                        dc_utterances_per_speaker=2, duration_s=1.0, test_fraction=test_fraction, **kw)


@pytest.fixture(scope="module")
def medium_manifest():
    cfg = _corpus()
    return build_splits(generate_speakers(cfg.adult_speakers, cfg.child_speakers,
                                          cfg.child_severity_range, 11), cfg, 11)


class TestSpeakers:

    def test_zero_severity_child_matches_adult(self):
        adult = gen_speaker("adult", 0.0, np.random.default_rng(3))
        child = gen_speaker("child", 0.0, np.random.default_rng(3))
        assert (adult.f0, adult.resonances, adult.bandwidths) == (child.f0, child.resonances, child.bandwidths)

    def test_full_severity_multipliers(self):
        adult = gen_speaker("adult", 0.0, np.random.default_rng(4), speaker_id="a")
        child = gen_speaker("child", 1.0, np.random.default_rng(4), speaker_id="c")
        assert child.f0 == pytest.approx(1.8 * adult.f0)
        np.testing.assert_allclose(child.resonances, 1.35 * np.asarray(adult.resonances))
        np.testing.assert_allclose(child.bandwidths, 1.35 * np.asarray(adult.bandwidths))

    def test_adult_f0_range(self):
        rng = np.random.default_rng(5)
        f0s = [gen_speaker("adult", 0.0, rng).f0 for _ in range(200)]
        assert 90.0 <= min(f0s) and max(f0s) <= 180.0

    @pytest.mark.parametrize("domain,severity", [("adult", 0.5), ("child", 1.5), ("child", -0.1), ("teen", 0.0)])
    def test_invalid(self, domain, severity):
        with pytest.raises(DataError):
            gen_speaker(domain, severity, np.random.default_rng(0))

    def test_bands(self):
        assert severity_band("adult", 0.0) == "adult"
        assert severity_band("child", 0.9) == "child-young"
        assert severity_band("child", 0.6) == "child-mid"
        assert severity_band("child", 0.3) == "child-old"

    def test_children_cover_every_band(self):
        speakers = generate_speakers(2, 9, (0.2, 1.0), seed=1)
        bands = [s.band for s in speakers if s.domain == "child"]
        assert sorted(set(bands)) == sorted(SEVERITY_BANDS)
        assert all(bands.count(b) == 3 for b in SEVERITY_BANDS)

    def test_generation_is_seeded(self):
        assert generate_speakers(3, 3, (0.2, 1.0), 9) == generate_speakers(3, 3, (0.2, 1.0), 9)


class TestSynthesis:

    def _profile(self):
        return gen_speaker("adult", 0.0, np.random.default_rng(21), speaker_id="A")

    def test_deterministic(self):
        spec = UtteranceSpec("u", "A", 1.0, -40.0, rng_seed=99)
        a, b = synth_utterance(self._profile(), spec), synth_utterance(self._profile(), spec)
        assert np.array_equal(a.samples, b.samples)

    def test_peak_level(self):
        w = synth_utterance(self._profile(), UtteranceSpec("u", "A", 1.5, -35.0, rng_seed=1))
        assert w.samples.shape == (24000,)
        assert np.max(np.abs(w.samples)) == pytest.approx(0.9, rel=1e-5)

    def test_different_seeds_differ(self):
        p = self._profile()
        a = synth_utterance(p, UtteranceSpec("u1", "A", 1.0, -40.0, rng_seed=1))
        b = synth_utterance(p, UtteranceSpec("u2", "A", 1.0, -40.0, rng_seed=2))
        assert not np.array_equal(a.samples, b.samples)

    def test_envelope_peaks_at_resonances(self):
        resonances, bandwidths = (500.0, 1500.0, 2500.0), (80.0, 100.0, 140.0)
        impulse = np.zeros(512)
        impulse[0] = 1.0
        magnitude = np.abs(np.fft.rfft(apply_envelope(impulse, resonances, bandwidths, 16000)))
        freqs = np.fft.rfftfreq(512, 1 / 16000)
        for r in resonances:
            window = np.flatnonzero(np.abs(freqs - r) <= 100.0)
            peak = freqs[window[np.argmax(magnitude[window])]]
            assert abs(peak - r) <= 16000 / 512

    def test_syllable_plan(self):
        sr, n = 16000, 32000
        spans = syllable_plan(n, sr, np.random.default_rng(4))
        assert len(spans) >= 5
        assert spans[0][0] >= 40 * sr // 1000
        for (s0, e0), (s1, e1) in zip(spans, spans[1:]):
            assert s1 - e0 >= 40 * sr // 1000
        assert all(e - s >= 30 * sr // 1000 and e <= n for s, e in spans)

    def test_pauses_are_silent_without_noise(self):
        w = synth_utterance(self._profile(), UtteranceSpec("u", "A", 2.0, float("-inf"), rng_seed=5))
        silent = np.mean(w.samples == 0.0)
        assert 0.05 < silent < 0.6

    def test_envelope_survives_mean_normalization(self):
        f = utterance_features(synth_utterance(self._profile(), UtteranceSpec("u", "A", 2.0, -40.0, rng_seed=6)))
        assert np.abs(f.mean(axis=0)).max() < 1e-3
        assert f.std(axis=0).max() > 2.0

    def test_silent_spec_is_rejected_downstream(self):
        spec = UtteranceSpec("u", "A", 1.0, float("-inf"), rng_seed=3, harmonic_amplitude=0.0)
        w = synth_utterance(self._profile(), spec)
        assert not w.has_signal()
        with pytest.raises(DataError):
            utterance_features(w)

    def test_short_duration(self):
        with pytest.raises(DataError):
            UtteranceSpec("u", "A", 0.5, -40.0, rng_seed=0)


class TestSplits:

    def test_speaker_disjoint(self, medium_manifest):
        for domain in ("adult", "child"):
            train = set(medium_manifest.speaker_ids("train", domain))
            test = set(medium_manifest.speaker_ids("test", domain))
            assert train and test and not train & test

    def test_test_speaker_count(self, medium_manifest):
        assert len(medium_manifest.speaker_ids("test", "adult")) == 5
        assert len(medium_manifest.speaker_ids("test", "child")) == 5

    def test_dc_train_threshold(self, medium_manifest):
        dc = medium_manifest.select("dc-train")
        assert dc
        assert all(e.domain == "adult" or e.severity >= 0.55 for e in dc)
        test_speakers = set(medium_manifest.speaker_ids("test"))
        assert not {e.speaker_id for e in dc} & test_speakers

    def test_utterance_ids_unique(self, medium_manifest):
        ids = [e.utterance_id for e in medium_manifest.entries]
        assert len(ids) == len(set(ids))

    def test_deterministic(self, medium_manifest):
        cfg = _corpus()
        again = build_splits(generate_speakers(20, 20, cfg.child_severity_range, 11), cfg, 11)
        assert again.checksum() == medium_manifest.checksum()

    def test_insufficient_speakers(self):
        cfg = _corpus(adults=3, children=6, test_fraction=0.3)
        with pytest.raises(DataError):
            build_splits(generate_speakers(3, 6, cfg.child_severity_range, 0), cfg, 0)

    def test_loader_regenerates_bit_identical(self, medium_manifest):
        entry = medium_manifest.entries[3]
        a = CorpusLoader(medium_manifest).waveform(entry)
        b = synth_utterance(medium_manifest.speakers[entry.speaker_id], entry.spec())
        assert np.array_equal(a.samples, b.samples)


class TestGenerateCorpus:

    def test_wav_and_virtual(self, tmp_path):
        cfg = _corpus(adults=4, children=6, utterances=2, test_fraction=0.5)
        manifest = generate_corpus(cfg, seed=5, corpus_dir=tmp_path / "wav", threads=2)
        wavs = sorted((tmp_path / "wav" / "audio").rglob("*.wav"))
        assert len(wavs) == len(manifest)
        entry = manifest.entries[0]
        on_disk = read_wav(tmp_path / "wav" / entry.path)
        regenerated = synth_utterance(manifest.speakers[entry.speaker_id], entry.spec())
        assert np.array_equal(on_disk.samples, regenerated.samples)

        virtual = generate_corpus(cfg, seed=5, corpus_dir=tmp_path / "virtual", virtual=True)
        assert not (tmp_path / "virtual" / "audio").exists()
        assert all(e.path is None for e in virtual.entries)

    def test_rerun_same_checksum(self, tmp_path):
        cfg = _corpus(adults=4, children=6, utterances=2, test_fraction=0.5)
        first = generate_corpus(cfg, 5, tmp_path / "a", virtual=True)
        second = generate_corpus(cfg, 5, tmp_path / "b", virtual=True)
        assert first.checksum() == second.checksum()
        assert Manifest.load(tmp_path / "a").checksum() == first.checksum()

    def test_load_missing(self, tmp_path):
        with pytest.raises(PrerequisiteError):
            Manifest.load(tmp_path / "nowhere")


class TestTrials:

    def test_counts(self, medium_manifest, rng):
        trials = build_trials(medium_manifest, "train", 100, 100, rng, domain="adult")
        assert len(trials) == 200 and trials.n_pos == 100 and trials.n_neg == 100

    def test_pair_contracts(self, medium_manifest, rng):
        by_id = medium_manifest.by_id()
        trials = build_trials(medium_manifest, "train", 80, 80, rng)
        pairs = set()
        for t in trials:
            enroll, test = by_id[t.enroll_id], by_id[t.test_id]
            assert enroll.domain == test.domain
            assert (enroll.speaker_id == test.speaker_id) == (t.label == 1)
            pairs.add(frozenset((t.enroll_id, t.test_id)))
        assert len(pairs) == len(trials)

    def test_band_filter(self, medium_manifest, rng):
        by_id = medium_manifest.by_id()
        trials = build_trials(medium_manifest, "train", 20, 20, rng, domain="child", band="child-young")
        assert all(by_id[t.enroll_id].band == "child-young" for t in trials)

    def test_infeasible(self, rng):
        entries = [ManifestEntry(f"{s}-{u}", s, "adult", 0.0, "test") for s in ("a", "b") for u in range(2)]
        with pytest.raises(DataError):
            build_trials(Manifest(entries), "test", 3, 1, rng)

    def test_seeded(self, medium_manifest):
        a = build_trials(medium_manifest, "test", 10, 10, np.random.default_rng(2))
        b = build_trials(medium_manifest, "test", 10, 10, np.random.default_rng(2))
        assert a.trials == b.trials

    def test_trial_validation(self):
        with pytest.raises(DataError):
            Trial(1, "x", "x")
        with pytest.raises(DataError):
            Trial(2, "x", "y")

    def test_save_load(self, medium_manifest, rng, tmp_path):
        trials = build_trials(medium_manifest, "test", 5, 5, rng)
        trials.save(tmp_path / "trials.txt")
        assert TrialList.load(tmp_path / "trials.txt").trials == trials.trials
