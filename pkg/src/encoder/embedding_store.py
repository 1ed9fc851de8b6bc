# src/encoder/embedding_store.py
"""
Embedding extraction and the AASVEMBD store
File layout: magic "AASVEMBD", u32 version, u32 count, u32 dim, u32 id-block
length, newline-joined UTF-8 ids, then count x dim little-endian f32.
"""

import struct
from concurrent.futures import ThreadPoolExecutor
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Sequence, Union

import numpy as np

from config.logger import AASVLogger
from src.corpus.manifest import CorpusLoader, ManifestEntry
from src.encoder.tdnn import Embedding, SpeakerEncoder
from src.errors import DataError, ShapeError
from src.features.augment import DEFAULT_AUGMENT, AugmentConfig, augmented_features
from src.features.filterbank import cmn
from src.tensor_core.tensor import DTYPE

logger = AASVLogger.get_logger(__name__)

STORE_MAGIC = b"AASVEMBD"
STORE_VERSION = 1
_HEADER = struct.Struct("<8sIIII")

PathLike = Union[str, Path]


class EmbeddingStore:
    """Embeddings keyed by utterance id, stored as one (count, dim) matrix"""

    def __init__(self, ids: Sequence[str], matrix: np.ndarray):
        matrix = np.asarray(matrix, dtype=DTYPE)
        if matrix.ndim != 2 or matrix.shape[0] != len(ids):
            raise ShapeError(f"store matrix {matrix.shape} does not match {len(ids)} ids")
        if len(set(ids)) != len(ids):
            raise DataError("duplicate utterance ids in embedding store")
        self.ids = list(ids)
        self.matrix = matrix
        self._index = {u: i for i, u in enumerate(self.ids)}

    @classmethod
    def from_embeddings(cls, embeddings: Iterable[Embedding]) -> "EmbeddingStore":
        embeddings = list(embeddings)
        if not embeddings:
            raise DataError("no embeddings to store")
        return cls([e.utterance_id for e in embeddings], np.stack([e.values for e in embeddings]))

    def __len__(self):
        return len(self.ids)

    def __contains__(self, utterance_id: str) -> bool:
        return utterance_id in self._index

    @property
    def dim(self) -> int:
        return self.matrix.shape[1]

    def get(self, utterance_id: str) -> np.ndarray:
        try:
            return self.matrix[self._index[utterance_id]]
        except KeyError:
            raise DataError(f"utterance '{utterance_id}' not in embedding store") from None

    def rows(self, ids: Sequence[str]) -> np.ndarray:
        missing = [u for u in ids if u not in self._index]
        if missing:
            raise DataError(f"{len(missing)} utterances missing from store, e.g. '{missing[0]}'")
        return self.matrix[[self._index[u] for u in ids]]

    def save(self, path: PathLike):
        id_block = "\n".join(self.ids).encode("utf-8")
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        with open(path, "wb") as fh:
            fh.write(_HEADER.pack(STORE_MAGIC, STORE_VERSION, len(self.ids), self.dim, len(id_block)))
            fh.write(id_block)
            fh.write(np.ascontiguousarray(self.matrix, dtype="<f4").tobytes())

    @classmethod
    def load(cls, path: PathLike) -> "EmbeddingStore":
        raw = Path(path).read_bytes()
        if len(raw) < _HEADER.size:
            raise DataError(f"{path}: truncated embedding store")
        magic, version, count, dim, id_len = _HEADER.unpack_from(raw)
        if magic != STORE_MAGIC or version != STORE_VERSION:
            raise DataError(f"{path}: not an embedding store (magic {magic!r}, version {version})")
        offset = _HEADER.size
        ids = raw[offset:offset + id_len].decode("utf-8").split("\n") if count else []
        offset += id_len
        body = raw[offset:]
        if len(body) != count * dim * 4:
            raise DataError(f"{path}: expected {count * dim} values, found {len(body) // 4}")
        return cls(ids, np.frombuffer(body, dtype="<f4").reshape(count, dim).astype(DTYPE))


def extract_embeddings(encoder: SpeakerEncoder, loader: CorpusLoader, entries: Sequence[ManifestEntry],
                       threads: int = 1) -> EmbeddingStore:
    """Embed clean features of every entry; results keep manifest order"""
    entries = list(entries)
    if not entries:
        raise DataError("no utterances to embed")

    def _embed(entry: ManifestEntry) -> Embedding:
        return encoder.embed(loader.features(entry), entry.utterance_id)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        embeddings = list(pool.map(_embed, entries))
    logger.info(f"Extracted {len(embeddings)} embeddings (d={encoder.embedding_dim})")
    return EmbeddingStore.from_embeddings(embeddings)


def augmented_embeddings(encoder: SpeakerEncoder, loader: CorpusLoader, entries: Sequence[ManifestEntry],
                         copies: int, seed: int, aug: AugmentConfig = DEFAULT_AUGMENT,
                         threads: int = 1) -> List[Embedding]:
    """
    Embeddings of randomly augmented copies of each entry

    Copy k of entry i draws its augmentation from a stream keyed on (seed, i, k),
    so the output is independent of the thread count.
    """
    jobs = [(i, k, entry) for i, entry in enumerate(entries) for k in range(copies)]

    def _embed(job) -> Embedding:
        i, k, entry = job
        rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(13, i, k)))
        feats = cmn(augmented_features(loader.waveform(entry), rng, aug, loader.fb))
        return encoder.embed(feats, f"{entry.utterance_id}#aug{k}")

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(_embed, jobs))
