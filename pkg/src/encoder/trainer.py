# src/encoder/trainer.py
"""
AAM-softmax training of the speaker encoder and child-domain fine-tuning
"""

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from typing import Iterable, List, Optional, Sequence, Set, Tuple

import numpy as np

from config.logger import AASVLogger
from config.settings import TRAIN_CONFIG
from src.corpus.manifest import CorpusLoader, ManifestEntry
from src.encoder.tdnn import ClassificationHead, EncoderArchitecture, SpeakerEncoder
from src.errors import ConfigError, DataError
from src.features.augment import DEFAULT_AUGMENT, AugmentConfig, augmented_features
from src.features.filterbank import (
    DEFAULT_FILTERBANK, FilterbankConfig, Waveform, cmn, crop_or_pad, logmel,
)
from src.tensor_core.losses import AamConfig, AamSoftmaxLoss
from src.tensor_core.optim import Adam, CyclicLrSchedule, lr_at
from src.tensor_core.tensor import DTYPE, check_finite

logger = AASVLogger.get_logger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 15
    batch_size: int = 16
    crop_frames: int = 198
    base_lr: float = 1e-8
    max_lr: float = 1e-3
    cycle_steps: Optional[int] = None
    weight_decay: float = 2e-6
    beta1: float = 0.9
    beta2: float = 0.999
    epsilon: float = 1e-8
    aam_scale: float = 30.0
    aam_margin: float = 0.2
    augment_prob: float = 0.6
    seed: int = 0

    def __post_init__(self):
        if self.epochs < 0:
            raise ConfigError(f"epochs must be >= 0, got {self.epochs}")
        if self.batch_size < 1 or self.crop_frames < 1:
            raise ConfigError("batch_size and crop_frames must be positive")
        if not 0.0 <= self.augment_prob <= 1.0:
            raise ConfigError(f"augment_prob must lie in [0, 1], got {self.augment_prob}")

    @classmethod
    def from_dict(cls, cfg: dict, seed: Optional[int] = None) -> "TrainConfig":
        kwargs = {k: cfg[k] for k in cls.__dataclass_fields__ if k in cfg}
        if seed is not None:
            kwargs["seed"] = seed
        return cls(**kwargs)

    @property
    def aam(self) -> AamConfig:
        return AamConfig(self.aam_scale, self.aam_margin)


DEFAULT_TRAIN = TrainConfig.from_dict(TRAIN_CONFIG)


@dataclass
class TrainingLog:
    step_loss: List[float] = field(default_factory=list)
    step_lr: List[float] = field(default_factory=list)
    epoch_loss: List[float] = field(default_factory=list)
    epoch_accuracy: List[float] = field(default_factory=list)

    def to_dict(self) -> dict:
        return asdict(self)


class SpeakerDataset:
    """Labelled training waveforms held in memory"""

    def __init__(self, utterance_ids: Sequence[str], speaker_ids: Sequence[str],
                 waveforms: Sequence[Waveform]):
        if not len(utterance_ids) == len(speaker_ids) == len(waveforms):
            raise DataError("utterance, speaker and waveform lists differ in length")
        self.utterance_ids = list(utterance_ids)
        self.speakers = list(dict.fromkeys(speaker_ids))
        index = {s: i for i, s in enumerate(self.speakers)}
        self.labels = np.array([index[s] for s in speaker_ids], dtype=np.int64)
        self.waveforms = list(waveforms)

        counts = np.bincount(self.labels, minlength=len(self.speakers))
        if len(self.speakers) < 2:
            raise DataError(f"training needs >= 2 speakers, got {len(self.speakers)}")
        if counts.min() < 2:
            raise DataError(f"speaker {self.speakers[int(counts.argmin())]} has fewer than 2 utterances")

    @classmethod
    def from_manifest(cls, entries: Iterable[ManifestEntry], loader: CorpusLoader,
                      threads: int = 1) -> "SpeakerDataset":
        entries = list(entries)
        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            waveforms = list(pool.map(loader.waveform, entries))
        return cls([e.utterance_id for e in entries], [e.speaker_id for e in entries], waveforms)

    def __len__(self):
        return len(self.utterance_ids)

    @property
    def num_speakers(self) -> int:
        return len(self.speakers)


def crop_waveform(w: Waveform, crop_frames: int, rng: np.random.Generator,
                  fb: FilterbankConfig = DEFAULT_FILTERBANK) -> Waveform:
    """Random contiguous slice long enough for exactly crop_frames frames"""
    needed = fb.window + (crop_frames - 1) * fb.hop
    n = w.samples.shape[0]
    if n <= needed:
        return w
    start = int(rng.integers(0, n - needed + 1))
    return Waveform(w.samples[start:start + needed], w.sample_rate)


def training_features(w: Waveform, cfg: TrainConfig, rng: np.random.Generator,
                      aug: AugmentConfig = DEFAULT_AUGMENT,
                      fb: FilterbankConfig = DEFAULT_FILTERBANK) -> np.ndarray:
    """crop -> (augment) -> logmel -> crop_or_pad -> cmn"""
    w = crop_waveform(w, cfg.crop_frames, rng, fb)
    if rng.random() < cfg.augment_prob:
        feats = augmented_features(w, rng, aug, fb)
    else:
        feats = logmel(w, fb)
    return cmn(crop_or_pad(feats, cfg.crop_frames, rng))


def _train_loop(encoder: SpeakerEncoder, head: ClassificationHead, dataset: SpeakerDataset,
                cfg: TrainConfig, aug: AugmentConfig, fb: FilterbankConfig) -> TrainingLog:
    log = TrainingLog()
    if cfg.epochs == 0:
        return log

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(11,)))
    steps_per_epoch = math.ceil(len(dataset) / cfg.batch_size)
    schedule = CyclicLrSchedule(cfg.base_lr, cfg.max_lr, cfg.cycle_steps or 2 * steps_per_epoch)
    optimizer = Adam(encoder.parameters() + head.parameters(), cfg.weight_decay,
                     cfg.beta1, cfg.beta2, cfg.epsilon)
    loss_fn = AamSoftmaxLoss(cfg.aam)

    step = 0
    for epoch in range(cfg.epochs):
        order = rng.permutation(len(dataset))
        losses, correct = [], 0
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            x = np.stack([training_features(dataset.waveforms[i], cfg, rng, aug, fb) for i in batch])
            labels = dataset.labels[batch]

            optimizer.zero_grad()
            emb = encoder.forward(x, training=True)
            loss = loss_fn.forward(emb, head.weight.value, labels)
            check_finite(np.asarray(loss), "training loss")
            correct += int(np.sum(np.argmax(loss_fn.cosines, axis=1) == labels))
            d_emb, d_head = loss_fn.backward()
            head.weight.accumulate(d_head.astype(DTYPE))
            encoder.backward(d_emb.astype(DTYPE))

            lr = lr_at(schedule, step)
            optimizer.step(lr)
            log.step_loss.append(float(loss))
            log.step_lr.append(lr)
            losses.append(float(loss))
            step += 1

        log.epoch_loss.append(float(np.mean(losses)))
        log.epoch_accuracy.append(correct / len(dataset))
        logger.info(f"epoch {epoch + 1}/{cfg.epochs}: loss {log.epoch_loss[-1]:.4f}, "
                    f"accuracy {log.epoch_accuracy[-1]:.3f}, lr {log.step_lr[-1]:.2e}")
    return log


def train_encoder(dataset: SpeakerDataset, cfg: TrainConfig = DEFAULT_TRAIN,
                  arch: EncoderArchitecture = None, aug: AugmentConfig = DEFAULT_AUGMENT,
                  fb: FilterbankConfig = DEFAULT_FILTERBANK,
                  encoder: Optional[SpeakerEncoder] = None) -> Tuple[SpeakerEncoder, ClassificationHead, TrainingLog]:
    """
    Minimize AAM-softmax cross-entropy over speaker labels

    Args:
        dataset: labelled waveforms (>= 2 speakers, >= 2 utterances each)
        cfg: optimization settings; cfg.seed fixes initialization, batching
            and augmentation draws
        arch: architecture for a fresh encoder (ignored when encoder is given)
        aug: augmentation settings
        fb: filter-bank settings
        encoder: start from these weights instead of a fresh initialization

    Returns:
        (encoder, head, log); zero epochs returns the initialization unchanged
    """
    if encoder is None:
        encoder = SpeakerEncoder(arch or EncoderArchitecture(), seed=cfg.seed)
    head = ClassificationHead.create(dataset.num_speakers, encoder.embedding_dim, cfg.seed, dataset.speakers)
    logger.info(f"Training encoder on {len(dataset)} utterances / {dataset.num_speakers} speakers "
                f"for {cfg.epochs} epochs")
    log = _train_loop(encoder, head, dataset, cfg, aug, fb)
    return encoder, head, log


def finetune(encoder_a: SpeakerEncoder, child_dataset: SpeakerDataset, cfg: TrainConfig = DEFAULT_TRAIN,
             arch: Optional[EncoderArchitecture] = None, adult_speakers: Optional[Set[str]] = None,
             aug: AugmentConfig = DEFAULT_AUGMENT,
             fb: FilterbankConfig = DEFAULT_FILTERBANK) -> Tuple[SpeakerEncoder, ClassificationHead, TrainingLog]:
    """
    Continue training a copy of the adult encoder on child data with a new head

    encoder_a itself is never modified; every parameter stays trainable.
    """
    if arch is not None and arch != encoder_a.arch:
        raise ConfigError(f"configured architecture {arch} does not match the adult encoder {encoder_a.arch}")
    if adult_speakers:
        shared = adult_speakers & set(child_dataset.speakers)
        if shared:
            raise DataError(f"fine-tuning speakers overlap adult training speakers: {sorted(shared)[:5]}")
    encoder_c = encoder_a.copy()
    head = ClassificationHead.create(child_dataset.num_speakers, encoder_c.embedding_dim, cfg.seed,
                                     child_dataset.speakers)
    logger.info(f"Fine-tuning on {len(child_dataset)} utterances / {child_dataset.num_speakers} speakers "
                f"for {cfg.epochs} epochs")
    log = _train_loop(encoder_c, head, child_dataset, cfg, aug, fb)
    return encoder_c, head, log


def evaluate_accuracy(encoder: SpeakerEncoder, head: ClassificationHead, dataset: SpeakerDataset,
                      fb: FilterbankConfig = DEFAULT_FILTERBANK) -> float:
    """Speaker-classification accuracy on clean full-length features (argmax cosine to head rows)"""
    rows = head.weight.value / np.linalg.norm(head.weight.value, axis=1, keepdims=True)
    correct = 0
    for w, label in zip(dataset.waveforms, dataset.labels):
        emb = encoder.embed(cmn(logmel(w, fb))).values
        correct += int(np.argmax(rows @ emb) == label)
    return correct / len(dataset)
