# src/fusion/fusion.py
"""
Posterior-weighted fusion of child and adult embeddings
E_R = [p_c * e_c ; p_a * e_a] in 2d dimensions, with e_c and e_a
L2-normalized first. PlainConcat drops the weights; ChildOnly and
AdultOnly bypass fusion and score the raw d-dim embedding.
"""

import json
from dataclasses import dataclass
from enum import Enum
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from config.logger import AASVLogger
from src.domain.classifier import DomainClassifier, DomainPosterior
from src.encoder.embedding_store import EmbeddingStore
from src.errors import DataError, ShapeError
from src.tensor_core.tensor import DTYPE

logger = AASVLogger.get_logger(__name__)


class FusionMode(Enum):
    AASV = "aasv"
    PLAIN_CONCAT = "plain-concat"
    CHILD_ONLY = "child-only"
    ADULT_ONLY = "adult-only"


@dataclass
class FusedEmbedding:
    values: np.ndarray
    utterance_id: str = ""
    posterior: Optional[DomainPosterior] = None

    @property
    def dim(self) -> int:
        return self.values.shape[0]


def _unit(v: np.ndarray, what: str) -> np.ndarray:
    v = np.asarray(v, dtype=np.float64)
    norm = np.linalg.norm(v)
    if norm == 0:
        raise DataError(f"zero-norm {what} embedding")
    return v / norm


def _check_pair(e_c: np.ndarray, e_a: np.ndarray):
    if e_c.ndim != 1 or e_c.shape != e_a.shape:
        raise ShapeError(f"child embedding {e_c.shape} and adult embedding {e_a.shape} differ")


def fuse(e_c: np.ndarray, e_a: np.ndarray, p: DomainPosterior, utterance_id: str = "") -> FusedEmbedding:
    """[p_c * unit(e_c) ; p_a * unit(e_a)]"""
    e_c, e_a = np.asarray(e_c), np.asarray(e_a)
    _check_pair(e_c, e_a)
    values = np.concatenate([p.p_c * _unit(e_c, "child"), p.p_a * _unit(e_a, "adult")])
    return FusedEmbedding(values, utterance_id, p)


def plain_concat(e_c: np.ndarray, e_a: np.ndarray, utterance_id: str = "") -> FusedEmbedding:
    """[unit(e_c) ; unit(e_a)], the domain-classifier-free ablation"""
    e_c, e_a = np.asarray(e_c), np.asarray(e_a)
    _check_pair(e_c, e_a)
    return FusedEmbedding(np.concatenate([_unit(e_c, "child"), _unit(e_a, "adult")]), utterance_id)


def fused_cosine(f1: FusedEmbedding, f2: FusedEmbedding) -> float:
    if f1.dim != f2.dim:
        raise ShapeError(f"fused dims differ: {f1.dim} vs {f2.dim}")
    n1, n2 = np.linalg.norm(f1.values), np.linalg.norm(f2.values)
    if n1 == 0 or n2 == 0:
        raise DataError("zero-norm fused embedding")
    return float(np.dot(f1.values, f2.values) / (n1 * n2))


def fuse_matrices(child: np.ndarray, adult: np.ndarray, posteriors: Optional[np.ndarray]) -> np.ndarray:
    """
    Row-wise fusion of (n, d) child and adult embeddings

    posteriors is (n, 2) rows [p_c, p_a]; None gives the plain concatenation.
    """
    if child.shape != adult.shape or child.ndim != 2:
        raise ShapeError(f"child {child.shape} and adult {adult.shape} matrices differ")
    c = child.astype(np.float64)
    a = adult.astype(np.float64)
    c_norm = np.linalg.norm(c, axis=1, keepdims=True)
    a_norm = np.linalg.norm(a, axis=1, keepdims=True)
    if np.any(c_norm == 0) or np.any(a_norm == 0):
        raise DataError("zero-norm embedding in fusion input")
    c, a = c / c_norm, a / a_norm
    if posteriors is not None:
        c = c * posteriors[:, :1]
        a = a * posteriors[:, 1:2]
    return np.concatenate([c, a], axis=1)


def fuse_store(child_store: EmbeddingStore, adult_store: EmbeddingStore, mode: FusionMode,
               classifier: Optional[DomainClassifier] = None,
               classifier_store: Optional[EmbeddingStore] = None) -> Tuple[EmbeddingStore, List[dict]]:
    """
    Fuse every utterance present in both stores

    Each utterance's posterior comes from its own embedding in classifier_store
    (the adult store when omitted). Returns the fused store and the provenance
    records (utterance_id, p_c, p_a).
    """
    if mode in (FusionMode.CHILD_ONLY, FusionMode.ADULT_ONLY):
        raise DataError(f"{mode.value} scores raw embeddings, nothing to fuse")
    ids = [u for u in child_store.ids if u in adult_store]
    if not ids:
        raise DataError("child and adult stores share no utterances")
    child, adult = child_store.rows(ids), adult_store.rows(ids)

    posteriors = None
    provenance = []
    if mode is FusionMode.AASV:
        if classifier is None:
            raise DataError("AASV fusion needs a domain classifier")
        source = classifier_store if classifier_store is not None else adult_store
        posteriors = classifier.probabilities(source.rows(ids))
        provenance = [{"utterance_id": u, "p_c": float(p[0]), "p_a": float(p[1])}
                      for u, p in zip(ids, posteriors)]
    fused = fuse_matrices(child, adult, posteriors)
    logger.info(f"Fused {len(ids)} utterances ({mode.value}, dim {fused.shape[1]})")
    return EmbeddingStore(ids, fused.astype(DTYPE)), provenance


def write_provenance(records: List[dict], path: Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text("".join(json.dumps(r, sort_keys=True) + "\n" for r in records), encoding="utf-8")
