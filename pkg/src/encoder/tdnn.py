# src/encoder/tdnn.py
"""
Desk-scale TDNN speaker encoder
Three dilated frame layers (conv -> ReLU -> batch norm), a 1x1 bottleneck,
statistics pooling and a dense projection to a d-dim embedding.
"""

import copy
from collections import OrderedDict
from dataclasses import asdict, dataclass, field
from typing import Dict, List, Optional, Tuple

import numpy as np

from config.logger import AASVLogger
from config.settings import ENCODER_CONFIG
from src.errors import CheckpointError, ShapeError
from src.tensor_core.layers import BatchNorm1d, Conv1d, Dense, Layer, ReLU, StatsPooling
from src.tensor_core.tensor import DTYPE, Parameter, check_finite, check_ndim

logger = AASVLogger.get_logger(__name__)


@dataclass(frozen=True)
class EncoderArchitecture:
    input_dim: int = 80
    channels: int = 64
    kernel_sizes: Tuple[int, ...] = (5, 3, 3)
    dilations: Tuple[int, ...] = (1, 2, 3)
    bottleneck_channels: int = 128
    embedding_dim: int = 64
    bn_momentum: float = 0.9
    bn_eps: float = 1e-5

    def __post_init__(self):
        if len(self.kernel_sizes) != len(self.dilations):
            raise ShapeError("kernel_sizes and dilations must have equal length")

    @classmethod
    def from_dict(cls, cfg: dict) -> "EncoderArchitecture":
        kwargs = {k: cfg[k] for k in cls.__dataclass_fields__ if k in cfg}
        for key in ("kernel_sizes", "dilations"):
            if key in kwargs:
                kwargs[key] = tuple(int(v) for v in kwargs[key])
        return cls(**kwargs)

    def to_dict(self) -> dict:
        d = asdict(self)
        d["kernel_sizes"] = list(self.kernel_sizes)
        d["dilations"] = list(self.dilations)
        return d


DEFAULT_ARCHITECTURE = EncoderArchitecture.from_dict(ENCODER_CONFIG)


@dataclass
class Embedding:
    values: np.ndarray
    utterance_id: str = ""

    @property
    def dim(self) -> int:
        return self.values.shape[0]


@dataclass
class ClassificationHead:
    """Class weight rows (num_speakers, d), initialized to random unit vectors"""

    weight: Parameter
    speaker_ids: List[str] = field(default_factory=list)

    @classmethod
    def create(cls, num_classes: int, dim: int, seed: int, speaker_ids: Optional[List[str]] = None,
               name: str = "head") -> "ClassificationHead":
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(7,)))
        rows = rng.standard_normal((num_classes, dim))
        rows /= np.linalg.norm(rows, axis=1, keepdims=True)
        return cls(Parameter(f"{name}.weight", rows.astype(DTYPE)), list(speaker_ids or []))

    @property
    def num_classes(self) -> int:
        return self.weight.value.shape[0]

    def parameters(self) -> List[Parameter]:
        return [self.weight]


class SpeakerEncoder:
    """Frame layers + statistics pooling + dense projection"""

    def __init__(self, arch: EncoderArchitecture = DEFAULT_ARCHITECTURE, seed: int = 0):
        self.arch = arch
        self.seed = seed
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(5,)))
        layers: List[Layer] = []
        in_ch = arch.input_dim
        for i, (width, dilation) in enumerate(zip(arch.kernel_sizes, arch.dilations), 1):
            layers += [
                Conv1d(in_ch, arch.channels, width, dilation, name=f"frame{i}.conv", rng=rng, padding="edge"),
                ReLU(name=f"frame{i}.relu"),
                BatchNorm1d(arch.channels, arch.bn_momentum, arch.bn_eps, name=f"frame{i}.bn"),
            ]
            in_ch = arch.channels
        layers += [
            Conv1d(in_ch, arch.bottleneck_channels, 1, 1, name="bottleneck.conv", rng=rng),
            ReLU(name="bottleneck.relu"),
            BatchNorm1d(arch.bottleneck_channels, arch.bn_momentum, arch.bn_eps, name="bottleneck.bn"),
        ]
        self.frame_layers = layers
        self.pool = StatsPooling(eps=arch.bn_eps, name="pool")
        self.projection = Dense(2 * arch.bottleneck_channels, arch.embedding_dim, name="embedding", rng=rng)
        logger.debug(f"SpeakerEncoder initialized (d={arch.embedding_dim}, seed={seed})")

    @property
    def layers(self) -> List[Layer]:
        return self.frame_layers + [self.pool, self.projection]

    @property
    def embedding_dim(self) -> int:
        return self.arch.embedding_dim

    def parameters(self) -> List[Parameter]:
        return [p for layer in self.layers for p in layer.parameters()]

    def buffers(self) -> "OrderedDict[str, np.ndarray]":
        out = OrderedDict()
        for layer in self.layers:
            out.update(layer.buffers())
        return out

    def _frames_first(self, x: np.ndarray) -> np.ndarray:
        if x.ndim == 2:
            x = x[None]
        check_ndim(x, 3, "encoder input")
        if x.shape[2] != self.arch.input_dim:
            raise ShapeError(f"encoder expects {self.arch.input_dim} mels, got {x.shape[2]}")
        if x.shape[1] < 1:
            raise ShapeError("encoder input has no frames")
        return np.ascontiguousarray(x.transpose(0, 2, 1))

    def pooled(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """Statistics-pooled vector [mean ; std] before the projection, shape (batch, 2 * bottleneck)"""
        h = self._frames_first(x)
        for layer in self.frame_layers:
            h = layer.forward(h, training)
        return self.pool.forward(h, training)

    def forward(self, x: np.ndarray, training: bool = False) -> np.ndarray:
        """
        Embed a batch

        Args:
            x: (batch, frames, mels) or a single (frames, mels) matrix
            training: use batch statistics and keep caches for backward

        Returns:
            (batch, d) embeddings
        """
        return self.projection.forward(self.pooled(x, training), training)

    def backward(self, grad: np.ndarray) -> np.ndarray:
        """Accumulate parameter gradients; returns d loss / d input as (batch, frames, mels)"""
        g = self.projection.backward(grad)
        g = self.pool.backward(g)
        for layer in reversed(self.frame_layers):
            g = layer.backward(g)
        return g.transpose(0, 2, 1)

    def embed(self, features: np.ndarray, utterance_id: str = "") -> Embedding:
        """Inference-mode embedding of one (frames, mels) matrix"""
        check_ndim(features, 2, "features")
        values = self.forward(features.astype(DTYPE, copy=False), training=False)[0]
        check_finite(values, f"embedding {utterance_id}")
        return Embedding(values.astype(DTYPE), utterance_id)

    def state_dict(self) -> "OrderedDict[str, np.ndarray]":
        state = OrderedDict((p.name, p.value) for p in self.parameters())
        state.update(self.buffers())
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]):
        params = {p.name: p for p in self.parameters()}
        expected = set(params) | set(self.buffers())
        missing = expected - set(state)
        if missing:
            raise CheckpointError(f"state is missing tensors: {sorted(missing)[:5]}")
        for name, p in params.items():
            value = np.asarray(state[name])
            if value.shape != p.value.shape:
                raise CheckpointError(f"{name}: shape {value.shape} does not match {p.value.shape}")
            p.value = value.astype(DTYPE).copy()
            p.zero_grad()
        owners = {key: layer for layer in self.layers for key in layer.buffers()}
        for name, layer in owners.items():
            value = np.asarray(state[name])
            if value.shape != layer.buffers()[name].shape:
                raise CheckpointError(f"{name}: shape {value.shape} does not match")
            layer.set_buffer(name, value)

    def copy(self) -> "SpeakerEncoder":
        return copy.deepcopy(self)
