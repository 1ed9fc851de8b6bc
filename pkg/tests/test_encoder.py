"""
Tests for the speaker encoder, training, fine-tuning, checkpoints and weight merging
"""

import numpy as np
import pytest

from src.corpus import (
    CorpusConfig, CorpusLoader, UtteranceSpec, build_splits, build_trials, gen_speaker, generate_speakers,
    synth_utterance,
)
from src.corpus.synth import apply_envelope, harmonic_source
from src.encoder import (
    ClassificationHead, EmbeddingStore, EncoderArchitecture, SpeakerDataset, SpeakerEncoder,
    TrainConfig, evaluate_accuracy, extract_embeddings, finetune, load_encoder, save_encoder,
    train_encoder, training_features, wse_merge, wse_sweep,
)
from src.encoder.checkpoint import load_checkpoint
from src.errors import CheckpointError, ConfigError, DataError, ShapeError
from src.evaluation import cosine, eer, score_store
from src.features import Waveform, utterance_features
from tests.conftest import SEED, TINY_ARCH, TINY_TRAIN


def _states_equal(a: SpeakerEncoder, b: SpeakerEncoder) -> bool:
    sa, sb = a.state_dict(), b.state_dict()
    return list(sa) == list(sb) and all(np.array_equal(sa[k], sb[k]) for k in sa)


class TestSpeakerEncoder:

    def test_output_shapes(self, rng):
        encoder = SpeakerEncoder(TINY_ARCH, seed=1)
        assert encoder.forward(rng.standard_normal((3, 50, 80))).shape == (3, 8)
        assert encoder.forward(rng.standard_normal((50, 80))).shape == (1, 8)
        emb = encoder.embed(rng.standard_normal((20, 80)).astype(np.float32), "u1")
        assert emb.dim == 8 and emb.utterance_id == "u1"

    def test_constant_input_ignores_length(self):
        encoder = SpeakerEncoder(TINY_ARCH, seed=2)
        row = np.linspace(-1.0, 1.0, 80, dtype=np.float32)
        short = encoder.embed(np.tile(row, (30, 1))).values
        long = encoder.embed(np.tile(row, (90, 1))).values
        assert np.all(np.isfinite(short))
        np.testing.assert_allclose(short, long, atol=1e-5)

    def test_crops_of_stationary_utterance_agree(self):
        sr = 16000
        source = harmonic_source(np.full(3 * sr, 120.0), -9.0, sr)
        samples = apply_envelope(source, (500.0, 1500.0, 2500.0), (80.0, 100.0, 140.0), sr)
        samples = 0.9 * samples / np.max(np.abs(samples))
        encoder = SpeakerEncoder(TINY_ARCH, seed=5)
        first = encoder.embed(utterance_features(Waveform(samples[8000:40000], sr))).values
        second = encoder.embed(utterance_features(Waveform(samples[16000:48000], sr))).values
        assert cosine(first, second) > 0.99

    def test_wrong_input(self, rng):
        encoder = SpeakerEncoder(TINY_ARCH)
        with pytest.raises(ShapeError):
            encoder.forward(rng.standard_normal((2, 10, 40)))
        with pytest.raises(ShapeError):
            encoder.forward(np.zeros((2, 0, 80)))

    def test_seeded_initialization(self):
        assert _states_equal(SpeakerEncoder(TINY_ARCH, seed=3), SpeakerEncoder(TINY_ARCH, seed=3))
        assert not _states_equal(SpeakerEncoder(TINY_ARCH, seed=3), SpeakerEncoder(TINY_ARCH, seed=4))

    def test_mismatched_architecture(self):
        with pytest.raises(ShapeError):
            EncoderArchitecture(kernel_sizes=(3, 3), dilations=(1,))

    def test_head_rows_are_unit(self):
        head = ClassificationHead.create(5, 8, seed=0)
        np.testing.assert_allclose(np.linalg.norm(head.weight.value, axis=1), 1.0, rtol=1e-5)


class TestTraining:

    def test_log_lengths(self, trained_adult, adult_dataset):
        _, head, log = trained_adult
        batches = -(-len(adult_dataset) // TINY_TRAIN.batch_size)
        assert len(log.step_loss) == len(log.step_lr) == TINY_TRAIN.epochs * batches
        assert len(log.epoch_loss) == len(log.epoch_accuracy) == TINY_TRAIN.epochs
        assert np.all(np.isfinite(log.step_loss))
        assert head.num_classes == adult_dataset.num_speakers

    def test_zero_epochs_returns_initialization(self, adult_dataset):
        cfg = TrainConfig(epochs=0, batch_size=8, crop_frames=40, seed=SEED)
        encoder, _, log = train_encoder(adult_dataset, cfg, TINY_ARCH)
        assert log.step_loss == []
        assert _states_equal(encoder, SpeakerEncoder(TINY_ARCH, seed=SEED))

    def test_training_is_reproducible(self, adult_dataset, trained_adult):
        again, _, log = train_encoder(adult_dataset, TINY_TRAIN, TINY_ARCH)
        assert _states_equal(again, trained_adult[0])
        assert log.step_loss == trained_adult[2].step_loss

    def test_accuracy_in_range(self, trained_adult, adult_dataset):
        encoder, head, _ = trained_adult
        assert 0.0 <= evaluate_accuracy(encoder, head, adult_dataset) <= 1.0

    def test_training_features_shape(self, adult_dataset, rng):
        feats = training_features(adult_dataset.waveforms[0], TINY_TRAIN, rng)
        assert feats.shape == (TINY_TRAIN.crop_frames, 80)

    def test_invalid_config(self):
        with pytest.raises(ConfigError):
            TrainConfig(epochs=-1)
        with pytest.raises(ConfigError):
            TrainConfig(augment_prob=1.5)

    def test_default_epochs(self):
        assert TrainConfig().epochs == 15

    def test_dataset_validation(self):
        w = Waveform(np.ones(16000) * 0.1)
        with pytest.raises(DataError):
            SpeakerDataset(["a", "b"], ["s1", "s1"], [w, w])
        with pytest.raises(DataError):
            SpeakerDataset(["a", "b", "c"], ["s1", "s1", "s2"], [w, w, w])
        with pytest.raises(DataError):
            SpeakerDataset(["a"], ["s1", "s2"], [w])


class TestFinetune:

    def test_adult_encoder_untouched(self, trained_adult, child_dataset):
        encoder_a = trained_adult[0]
        before = encoder_a.copy()
        cfg = TrainConfig(epochs=1, batch_size=8, crop_frames=40, seed=SEED)
        encoder_c, head, _ = finetune(encoder_a, child_dataset, cfg)
        assert _states_equal(encoder_a, before)
        assert not _states_equal(encoder_c, encoder_a)
        assert head.speaker_ids == child_dataset.speakers

    def test_speaker_overlap(self, trained_adult, child_dataset):
        with pytest.raises(DataError):
            finetune(trained_adult[0], child_dataset, TINY_TRAIN, adult_speakers={child_dataset.speakers[0]})

    def test_architecture_mismatch(self, trained_adult, child_dataset):
        with pytest.raises(ConfigError):
            finetune(trained_adult[0], child_dataset, TINY_TRAIN, arch=EncoderArchitecture())


class TestCheckpoint:

    def test_round_trip(self, trained_adult, tmp_path, rng):
        encoder, head, _ = trained_adult
        save_encoder(tmp_path / "enc.ckpt", encoder, head, SEED, epoch=2)
        loaded, loaded_head, header = load_encoder(tmp_path / "enc.ckpt", TINY_ARCH)
        assert header["epoch"] == 2 and header["d"] == 8
        assert _states_equal(loaded, encoder)
        assert loaded_head.speaker_ids == head.speaker_ids
        feats = rng.standard_normal((40, 80)).astype(np.float32)
        np.testing.assert_array_equal(loaded.embed(feats).values, encoder.embed(feats).values)

    def test_identical_bytes(self, trained_adult, tmp_path):
        encoder, head, _ = trained_adult
        save_encoder(tmp_path / "a.ckpt", encoder, head, SEED, 2)
        save_encoder(tmp_path / "b.ckpt", encoder, head, SEED, 2)
        assert (tmp_path / "a.ckpt").read_bytes() == (tmp_path / "b.ckpt").read_bytes()

    def test_architecture_mismatch(self, trained_adult, tmp_path):
        save_encoder(tmp_path / "enc.ckpt", trained_adult[0], None, SEED, 2)
        with pytest.raises(CheckpointError):
            load_encoder(tmp_path / "enc.ckpt", EncoderArchitecture())

    def test_corrupt_files(self, trained_adult, tmp_path):
        path = tmp_path / "enc.ckpt"
        save_encoder(path, trained_adult[0], None, SEED, 2)
        raw = path.read_bytes()
        (tmp_path / "truncated.ckpt").write_bytes(raw[:-10])
        (tmp_path / "magic.ckpt").write_bytes(b"XXXXXXXX" + raw[8:])
        for name in ("truncated.ckpt", "magic.ckpt", "missing.ckpt"):
            with pytest.raises(CheckpointError):
                load_checkpoint(tmp_path / name)


class TestWeightSpaceEnsemble:

    def test_endpoints_and_midpoint(self):
        a, c = SpeakerEncoder(TINY_ARCH, seed=1), SpeakerEncoder(TINY_ARCH, seed=2)
        assert _states_equal(wse_merge(a, c, 1.0), a)
        assert _states_equal(wse_merge(a, c, 0.0), c)
        mid = wse_merge(a, c, 0.5).state_dict()
        for name, value in a.state_dict().items():
            np.testing.assert_allclose(mid[name], 0.5 * (value + c.state_dict()[name]), rtol=1e-6, atol=1e-7)

    def test_inputs_untouched(self):
        a, c = SpeakerEncoder(TINY_ARCH, seed=1), SpeakerEncoder(TINY_ARCH, seed=2)
        a_before = a.copy()
        wse_merge(a, c, 0.3)
        assert _states_equal(a, a_before)

    def test_invalid_alpha(self):
        a = SpeakerEncoder(TINY_ARCH)
        with pytest.raises(ConfigError):
            wse_merge(a, a, 1.5)

    def test_layout_mismatch(self):
        other = EncoderArchitecture(input_dim=80, channels=8, kernel_sizes=(3,), dilations=(1,),
                                    bottleneck_channels=16, embedding_dim=8)
        with pytest.raises(ShapeError):
            wse_merge(SpeakerEncoder(TINY_ARCH), SpeakerEncoder(other))

    def test_sweep(self):
        a, c = SpeakerEncoder(TINY_ARCH, seed=1), SpeakerEncoder(TINY_ARCH, seed=2)
        assert sorted(wse_sweep(a, c, [0.0, 0.5, 1.0])) == [0.0, 0.5, 1.0]


class TestEmbeddingStore:

    def test_save_load(self, tmp_path, rng):
        store = EmbeddingStore(["a", "b", "c"], rng.standard_normal((3, 4)))
        store.save(tmp_path / "x.emb")
        loaded = EmbeddingStore.load(tmp_path / "x.emb")
        assert loaded.ids == store.ids
        np.testing.assert_array_equal(loaded.matrix, store.matrix)

    def test_lookup_errors(self, rng):
        store = EmbeddingStore(["a", "b"], rng.standard_normal((2, 4)))
        assert "a" in store and store.dim == 4
        with pytest.raises(DataError):
            store.get("z")
        with pytest.raises(DataError):
            store.rows(["a", "z"])
        with pytest.raises(DataError):
            EmbeddingStore(["a", "a"], rng.standard_normal((2, 4)))
        with pytest.raises(ShapeError):
            EmbeddingStore(["a"], rng.standard_normal((2, 4)))

    def test_bad_file(self, tmp_path):
        (tmp_path / "bad.emb").write_bytes(b"NOTSTORE" + bytes(16))
        with pytest.raises(DataError):
            EmbeddingStore.load(tmp_path / "bad.emb")

    def test_extraction_independent_of_threads(self, trained_adult, tiny_manifest, tiny_loader):
        entries = tiny_manifest.select("test")[:6]
        one = extract_embeddings(trained_adult[0], tiny_loader, entries, threads=1)
        many = extract_embeddings(trained_adult[0], tiny_loader, entries, threads=3)
        assert one.ids == [e.utterance_id for e in entries]
        np.testing.assert_array_equal(one.matrix, many.matrix)


LEARNING_ARCH = EncoderArchitecture(channels=32, bottleneck_channels=64, embedding_dim=32)
LEARNING_TRAIN = TrainConfig(epochs=20, batch_size=16, crop_frames=100, max_lr=3e-3, augment_prob=0.3, seed=SEED)


@pytest.fixture(scope="module")
def ten_speakers():
    """10 adult speakers x 20 utterances of 2 s"""
    rng = np.random.default_rng(SEED)
    ids, speakers, waveforms = [], [], []
    for s in range(10):
        profile = gen_speaker("adult", 0.0, rng, speaker_id=f"spk{s}")
        for u in range(20):
            spec = UtteranceSpec(f"spk{s}-{u:02d}", profile.speaker_id, 2.0, -40.0, rng_seed=1000 * s + u)
            ids.append(spec.utterance_id)
            speakers.append(profile.speaker_id)
            waveforms.append(synth_utterance(profile, spec))
    return SpeakerDataset(ids, speakers, waveforms)


@pytest.fixture(scope="module")
def two_domain_run():
    """(manifest, loader, adult encoder, fine-tuned child encoder) on a small two-domain corpus"""
    cfg = CorpusConfig(adult_speakers=16, child_speakers=16, utterances_per_speaker=10,
                       dc_utterances_per_speaker=2, duration_s=2.0, test_fraction=0.25)
    manifest = build_splits(generate_speakers(16, 16, cfg.child_severity_range, SEED), cfg, SEED)
    loader = CorpusLoader(manifest)
    adults = SpeakerDataset.from_manifest(manifest.select("train", "adult"), loader)
    children = SpeakerDataset.from_manifest(manifest.select("train", "child"), loader)
    encoder_a, _, _ = train_encoder(adults, LEARNING_TRAIN, LEARNING_ARCH)
    encoder_c, _, _ = finetune(encoder_a, children, LEARNING_TRAIN, adult_speakers=set(adults.speakers))
    return manifest, loader, encoder_a, encoder_c


def _test_eer(manifest, loader, encoder, domain: str) -> float:
    trials = build_trials(manifest, "test", 120, 120, np.random.default_rng(SEED), domain=domain)
    store = extract_embeddings(encoder, loader, manifest.select("test", domain))
    return eer(score_store(trials, store))[0]


@pytest.mark.slow
class TestLearningOutcomes:

    def test_ten_speakers_are_learned(self, ten_speakers):
        encoder, head, log = train_encoder(ten_speakers, LEARNING_TRAIN, LEARNING_ARCH)
        assert log.epoch_loss[-1] < log.epoch_loss[0]
        assert evaluate_accuracy(encoder, head, ten_speakers) > 0.9

    def test_finetune_trades_adult_for_child_performance(self, two_domain_run):
        manifest, loader, encoder_a, encoder_c = two_domain_run
        assert _test_eer(manifest, loader, encoder_c, "child") < _test_eer(manifest, loader, encoder_a, "child")
        assert _test_eer(manifest, loader, encoder_c, "adult") > _test_eer(manifest, loader, encoder_a, "adult")
