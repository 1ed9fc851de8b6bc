# src/domain/classifier.py
"""
Domain classifier over fixed-length speaker embeddings
A two-layer perceptron (dense d->h, ReLU, dense h->2) whose softmax gives
p = [p_c, p_a]. Class index 0 is child, 1 is adult.
"""

from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np
from sklearn.utils.class_weight import compute_class_weight

from config.logger import AASVLogger
from config.settings import DOMAIN_CONFIG
from src.domain.metrics import accuracy, balanced_accuracy, f1_score
from src.encoder.checkpoint import load_checkpoint, save_checkpoint
from src.errors import CheckpointError, ConfigError, DataError, ShapeError
from src.tensor_core.layers import Dense, ReLU
from src.tensor_core.losses import batch_softmax_cross_entropy
from src.tensor_core.optim import Adam, CyclicLrSchedule, lr_at
from src.tensor_core.tensor import DTYPE, Parameter

logger = AASVLogger.get_logger(__name__)

CHILD, ADULT = 0, 1
DOMAIN_LABELS = {"child": CHILD, "adult": ADULT}


@dataclass(frozen=True)
class DomainPosterior:
    p_c: float
    p_a: float

    def __post_init__(self):
        for name, p in (("p_c", self.p_c), ("p_a", self.p_a)):
            if not 0.0 <= p <= 1.0:
                raise DataError(f"{name}={p} is not a probability")
        if abs(self.p_c + self.p_a - 1.0) > 1e-6:
            raise DataError(f"posterior does not sum to 1: {self.p_c} + {self.p_a}")


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    z = np.asarray(logits, dtype=np.float64)
    z = z - z.max(axis=-1, keepdims=True)
    e = np.exp(z)
    return e / e.sum(axis=-1, keepdims=True)


def posterior_from_logits(logits: np.ndarray) -> DomainPosterior:
    p = softmax_rows(np.asarray(logits).reshape(2))
    return DomainPosterior(float(p[CHILD]), float(p[ADULT]))


def _unit_rows(x: np.ndarray) -> np.ndarray:
    norms = np.linalg.norm(x, axis=1, keepdims=True)
    if np.any(norms == 0):
        raise DataError("zero-norm embedding given to the domain classifier")
    return x / norms


class DomainClassifier:
    """Embeddings are L2-normalized before the first dense layer"""

    def __init__(self, input_dim: int, hidden: int = 32, seed: int = 0):
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(17,)))
        self.input_dim = input_dim
        self.hidden_dim = hidden
        self.seed = seed
        self.hidden = Dense(input_dim, hidden, name="dc.hidden", rng=rng)
        self.relu = ReLU(name="dc.relu")
        self.output = Dense(hidden, 2, name="dc.output", rng=rng)

    def parameters(self) -> List[Parameter]:
        return self.hidden.parameters() + self.output.parameters()

    def logits(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        x = np.atleast_2d(np.asarray(x, dtype=DTYPE))
        if x.shape[1] != self.input_dim:
            raise ShapeError(f"domain classifier expects dim {self.input_dim}, got {x.shape[1]}")
        h = self.relu.forward(self.hidden.forward(_unit_rows(x), training), training)
        return self.output.forward(h, training)

    def backward(self, grad: np.ndarray):
        self.hidden.backward(self.relu.backward(self.output.backward(grad)))

    def classify(self, embedding: np.ndarray) -> DomainPosterior:
        """Posterior for one d-dim embedding"""
        embedding = np.asarray(embedding)
        if embedding.ndim != 1:
            raise ShapeError(f"classify takes one embedding, got shape {embedding.shape}")
        return posterior_from_logits(self.logits(embedding[None, :])[0])

    def probabilities(self, x: np.ndarray) -> np.ndarray:
        """(n, 2) rows [p_c, p_a]"""
        return softmax_rows(self.logits(x))

    def predict(self, x: np.ndarray) -> np.ndarray:
        return np.argmax(self.logits(x), axis=1)

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        return OrderedDict((p.name, p.value) for p in self.parameters())

    def save(self, path: Path, epoch: int = 0):
        arch = {"input_dim": self.input_dim, "hidden": self.hidden_dim}
        save_checkpoint(path, "domain-classifier", arch, self.state_dict(), self.seed, epoch, self.input_dim)

    @classmethod
    def load(cls, path: Path, expected_dim: Optional[int] = None) -> "DomainClassifier":
        ckpt = load_checkpoint(path)
        if ckpt.kind != "domain-classifier":
            raise CheckpointError(f"{path}: expected a domain-classifier checkpoint, found '{ckpt.kind}'")
        arch = ckpt.header["architecture"]
        if expected_dim is not None and arch["input_dim"] != expected_dim:
            raise CheckpointError(f"{path}: classifier dim {arch['input_dim']} != encoder dim {expected_dim}")
        model = cls(arch["input_dim"], arch["hidden"], ckpt.header["seed"])
        for p in model.parameters():
            if ckpt.tensors[p.name].shape != p.value.shape:
                raise CheckpointError(f"{path}: {p.name} has shape {ckpt.tensors[p.name].shape}")
            p.value = ckpt.tensors[p.name].copy()
            p.zero_grad()
        return model


@dataclass(frozen=True)
class DomainConfig:
    hidden: int = 32
    epochs: int = 20
    batch_size: int = 32
    base_lr: float = 1e-8
    max_lr: float = 1e-3
    cycle_steps: Optional[int] = None
    weight_decay: float = 2e-6
    test_fraction: float = 0.2
    augmented_copies: int = 1
    class_balanced: bool = True
    seed: int = 0

    def __post_init__(self):
        if self.hidden < 1 or self.batch_size < 1 or self.epochs < 0:
            raise ConfigError("domain classifier sizes must be positive")
        if not 0.0 < self.test_fraction < 1.0:
            raise ConfigError(f"test_fraction must lie in (0, 1), got {self.test_fraction}")

    @classmethod
    def from_dict(cls, cfg: dict, seed: Optional[int] = None) -> "DomainConfig":
        kwargs = {k: cfg[k] for k in cls.__dataclass_fields__ if k in cfg}
        if seed is not None:
            kwargs["seed"] = seed
        return cls(**kwargs)


DEFAULT_DOMAIN = DomainConfig.from_dict(DOMAIN_CONFIG)


@dataclass
class DomainTrainingResult:
    classifier: DomainClassifier
    accuracy: float
    f1: float
    balanced_accuracy: float
    epoch_loss: List[float] = field(default_factory=list)

    def summary(self) -> dict:
        return {"accuracy": self.accuracy, "f1": self.f1, "balanced_accuracy": self.balanced_accuracy,
                "epoch_loss": list(self.epoch_loss)}


def stratified_split(labels: np.ndarray, test_fraction: float,
                     rng: np.random.Generator) -> Tuple[np.ndarray, np.ndarray]:
    """Per-class shuffled index split; each class keeps at least one index on both sides"""
    train, test = [], []
    for c in np.unique(labels):
        idx = rng.permutation(np.flatnonzero(labels == c))
        n_test = min(max(1, int(round(test_fraction * idx.size))), idx.size - 1)
        test.extend(idx[:n_test])
        train.extend(idx[n_test:])
    return np.sort(np.array(train, dtype=np.int64)), np.sort(np.array(test, dtype=np.int64))


def balanced_class_weights(y: np.ndarray) -> np.ndarray:
    """n / (2 * n_class) per class, so child and adult rows carry equal total weight"""
    return compute_class_weight("balanced", classes=np.array([CHILD, ADULT]), y=y)


def train_domain_classifier(x: np.ndarray, y: np.ndarray, cfg: DomainConfig = DEFAULT_DOMAIN,
                            x_test: Optional[np.ndarray] = None,
                            y_test: Optional[np.ndarray] = None) -> DomainTrainingResult:
    """
    Cross-entropy training with Adam on frozen-encoder embeddings

    With cfg.class_balanced each class is weighted by its inverse frequency.

    Args:
        x: (n, d) training embeddings
        y: (n,) labels, 0 = child, 1 = adult
        cfg: classifier settings
        x_test, y_test: held-out set; when omitted a stratified
            cfg.test_fraction split of (x, y) is held out

    Returns:
        DomainTrainingResult with held-out accuracy, F1 (child positive) and
        balanced accuracy
    """
    x = np.asarray(x, dtype=DTYPE)
    y = np.asarray(y, dtype=np.int64)
    if x.ndim != 2 or x.shape[0] != y.shape[0]:
        raise ShapeError(f"embeddings {x.shape} and labels {y.shape} do not match")
    if np.unique(y).size < 2:
        raise DataError("domain classifier needs both classes in its training data")

    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(19,)))
    if x_test is None:
        train_idx, test_idx = stratified_split(y, cfg.test_fraction, rng)
        x, y, x_test, y_test = x[train_idx], y[train_idx], x[test_idx], y[test_idx]

    weights = balanced_class_weights(y) if cfg.class_balanced else None
    model = DomainClassifier(x.shape[1], cfg.hidden, cfg.seed)
    steps_per_epoch = int(np.ceil(len(y) / cfg.batch_size))
    schedule = CyclicLrSchedule(cfg.base_lr, cfg.max_lr, cfg.cycle_steps or 2 * steps_per_epoch)
    optimizer = Adam(model.parameters(), cfg.weight_decay)

    epoch_loss = []
    step = 0
    for _ in range(cfg.epochs):
        order = rng.permutation(len(y))
        losses = []
        for start in range(0, len(order), cfg.batch_size):
            batch = order[start:start + cfg.batch_size]
            optimizer.zero_grad()
            loss, grad = batch_softmax_cross_entropy(model.logits(x[batch], training=True), y[batch],
                                                      class_weights=weights)
            model.backward(grad.astype(DTYPE))
            optimizer.step(lr_at(schedule, step))
            losses.append(loss)
            step += 1
        epoch_loss.append(float(np.mean(losses)))

    predictions = model.predict(x_test)
    y_test = np.asarray(y_test, dtype=np.int64)
    result = DomainTrainingResult(
        classifier=model,
        accuracy=accuracy(predictions, y_test),
        f1=f1_score(predictions, y_test, positive_class=CHILD),
        balanced_accuracy=balanced_accuracy(predictions, y_test),
        epoch_loss=epoch_loss,
    )
    logger.info(f"Domain classifier: accuracy {result.accuracy:.3f}, F1 {result.f1:.3f}, "
                f"balanced accuracy {result.balanced_accuracy:.3f}")
    return result
