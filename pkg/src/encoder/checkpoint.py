# src/encoder/checkpoint.py
"""
AASVCKPT checkpoint files
magic "AASVCKPT", u32 header length, UTF-8 JSON header, then the tensors
as little-endian f32 blobs in the order the header lists them.
"""

import json
import struct
from collections import OrderedDict
from dataclasses import dataclass
from pathlib import Path
from typing import Dict, Optional, Tuple, Union

import numpy as np

from config.logger import AASVLogger
from src.encoder.tdnn import ClassificationHead, EncoderArchitecture, SpeakerEncoder
from src.errors import CheckpointError
from src.tensor_core.tensor import DTYPE, Parameter

logger = AASVLogger.get_logger(__name__)

CHECKPOINT_MAGIC = b"AASVCKPT"
FORMAT_VERSION = 1
_LENGTH = struct.Struct("<I")

PathLike = Union[str, Path]


@dataclass
class Checkpoint:
    header: dict
    tensors: "OrderedDict[str, np.ndarray]"

    @property
    def kind(self) -> str:
        return self.header["kind"]


def save_checkpoint(path: PathLike, kind: str, architecture: dict, tensors: Dict[str, np.ndarray],
                    seed: int, epoch: int, d: int, extra: Optional[dict] = None):
    """Serialize tensors in insertion order; identical inputs give identical bytes"""
    header = {
        "format_version": FORMAT_VERSION,
        "kind": kind,
        "architecture": architecture,
        "d": int(d),
        "seed": int(seed),
        "epoch": int(epoch),
        "tensors": [{"name": name, "shape": list(value.shape)} for name, value in tensors.items()],
    }
    if extra:
        header["extra"] = extra
    header_bytes = json.dumps(header, sort_keys=True, separators=(",", ":")).encode("utf-8")

    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "wb") as fh:
        fh.write(CHECKPOINT_MAGIC)
        fh.write(_LENGTH.pack(len(header_bytes)))
        fh.write(header_bytes)
        for value in tensors.values():
            fh.write(np.ascontiguousarray(value, dtype="<f4").tobytes())
    logger.debug(f"Saved {kind} checkpoint {path} ({len(tensors)} tensors)")


def load_checkpoint(path: PathLike) -> Checkpoint:
    try:
        raw = Path(path).read_bytes()
    except FileNotFoundError as exc:
        raise CheckpointError(f"checkpoint {path} not found") from exc
    if raw[:len(CHECKPOINT_MAGIC)] != CHECKPOINT_MAGIC:
        raise CheckpointError(f"{path}: bad magic")
    offset = len(CHECKPOINT_MAGIC)
    (header_len,) = _LENGTH.unpack_from(raw, offset)
    offset += _LENGTH.size
    try:
        header = json.loads(raw[offset:offset + header_len].decode("utf-8"))
    except ValueError as exc:
        raise CheckpointError(f"{path}: unreadable header") from exc
    if header.get("format_version") != FORMAT_VERSION:
        raise CheckpointError(f"{path}: unsupported format version {header.get('format_version')}")
    offset += header_len

    tensors = OrderedDict()
    for spec in header["tensors"]:
        shape = tuple(spec["shape"])
        count = int(np.prod(shape)) if shape else 1
        end = offset + 4 * count
        if end > len(raw):
            raise CheckpointError(f"{path}: truncated at tensor {spec['name']}")
        tensors[spec["name"]] = np.frombuffer(raw[offset:end], dtype="<f4").reshape(shape).astype(DTYPE)
        offset = end
    if offset != len(raw):
        raise CheckpointError(f"{path}: {len(raw) - offset} trailing bytes")
    return Checkpoint(header, tensors)


def save_encoder(path: PathLike, encoder: SpeakerEncoder, head: Optional[ClassificationHead],
                 seed: int, epoch: int):
    tensors = OrderedDict(encoder.state_dict())
    extra = {}
    if head is not None:
        tensors[head.weight.name] = head.weight.value
        extra["speakers"] = head.speaker_ids
    save_checkpoint(path, "encoder", encoder.arch.to_dict(), tensors, seed, epoch,
                    encoder.embedding_dim, extra)


def load_encoder(path: PathLike, expected: Optional[EncoderArchitecture] = None
                 ) -> Tuple[SpeakerEncoder, Optional[ClassificationHead], dict]:
    """
    Rebuild an encoder (and its head, if stored)

    Raises:
        CheckpointError: wrong kind, or architecture differs from expected
    """
    ckpt = load_checkpoint(path)
    if ckpt.kind != "encoder":
        raise CheckpointError(f"{path}: expected an encoder checkpoint, found '{ckpt.kind}'")
    arch = EncoderArchitecture.from_dict(ckpt.header["architecture"])
    if expected is not None and arch != expected:
        raise CheckpointError(f"{path}: architecture {arch} does not match configured {expected}")
    encoder = SpeakerEncoder(arch, seed=ckpt.header["seed"])
    encoder.load_state_dict(ckpt.tensors)
    head = None
    if "head.weight" in ckpt.tensors:
        speakers = ckpt.header.get("extra", {}).get("speakers", [])
        head = ClassificationHead(Parameter("head.weight", ckpt.tensors["head.weight"].copy()), speakers)
    return encoder, head, ckpt.header
