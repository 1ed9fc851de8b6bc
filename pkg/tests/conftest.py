"""
Shared fixtures: a tiny virtual corpus and a briefly trained tiny encoder
"""

import numpy as np
import pytest

from src.corpus.manifest import CorpusConfig, CorpusLoader, build_splits
from src.corpus.speakers import generate_speakers
from src.encoder.tdnn import EncoderArchitecture
from src.encoder.trainer import SpeakerDataset, TrainConfig, train_encoder
from src.features.augment import DEFAULT_AUGMENT

SEED = 7

TINY_CORPUS = CorpusConfig(
    adult_speakers=8,
    child_speakers=12,
    utterances_per_speaker=4,
    dc_utterances_per_speaker=2,
    duration_s=1.0,
    test_fraction=0.5,
)

TINY_ARCH = EncoderArchitecture(
    input_dim=80,
    channels=8,
    kernel_sizes=(3, 3),
    dilations=(1, 2),
    bottleneck_channels=16,
    embedding_dim=8,
)

TINY_TRAIN = TrainConfig(epochs=2, batch_size=8, crop_frames=40, augment_prob=0.5, seed=SEED)

# config overrides giving the same tiny setup through the CLI
TINY_OVERRIDES = [
    "corpus.adult_speakers=8",
    "corpus.child_speakers=12",
    "corpus.utterances_per_speaker=4",
    "corpus.dc_utterances_per_speaker=2",
    "corpus.duration_s=1.0",
    "corpus.test_fraction=0.5",
    "corpus.virtual=true",
    "encoder.channels=8",
    "encoder.kernel_sizes=[3, 3]",
    "encoder.dilations=[1, 2]",
    "encoder.bottleneck_channels=16",
    "encoder.embedding_dim=8",
    "train.epochs=1",
    "train.batch_size=8",
    "train.crop_frames=40",
    "finetune.epochs=1",
    "finetune.batch_size=8",
    "finetune.crop_frames=40",
    "domain.epochs=3",
    "domain.hidden=8",
    "ratio.adult_multipliers=[1, 2]",
    "ratio.child_count=2",
    "eval.n_pos=10",
    "eval.n_neg=10",
]


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture(scope="session")
def tiny_speakers():
    return generate_speakers(TINY_CORPUS.adult_speakers, TINY_CORPUS.child_speakers,
                             TINY_CORPUS.child_severity_range, SEED)


@pytest.fixture(scope="session")
def tiny_manifest(tiny_speakers):
    return build_splits(tiny_speakers, TINY_CORPUS, SEED)


@pytest.fixture(scope="session")
def tiny_loader(tiny_manifest):
    return CorpusLoader(tiny_manifest)


@pytest.fixture(scope="session")
def adult_dataset(tiny_manifest, tiny_loader):
    return SpeakerDataset.from_manifest(tiny_manifest.select("train", "adult"), tiny_loader)


@pytest.fixture(scope="session")
def child_dataset(tiny_manifest, tiny_loader):
    return SpeakerDataset.from_manifest(tiny_manifest.select("train", "child"), tiny_loader)


@pytest.fixture(scope="session")
def trained_adult(adult_dataset):
    """(encoder, head, log) after a short adult training run"""
    return train_encoder(adult_dataset, TINY_TRAIN, TINY_ARCH, DEFAULT_AUGMENT)


@pytest.fixture
def tiny_cli_args(tmp_path):
    """Common CLI arguments pointing every output into tmp_path"""
    args = ["--seed", str(SEED), "--threads", "2",
            "--corpus-dir", str(tmp_path / "corpus"),
            "--checkpoints-dir", str(tmp_path / "checkpoints"),
            "--report-dir", str(tmp_path / "reports")]
    for item in TINY_OVERRIDES:
        args += ["--set", item]
    return args
