# src/evaluation/scoring.py
"""
Cosine scoring of verification trials
"""

from dataclasses import dataclass
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from src.corpus.trials import Trial, TrialList
from src.domain.classifier import DomainClassifier
from src.encoder.embedding_store import EmbeddingStore
from src.errors import DataError, ShapeError
from src.fusion.fusion import FusionMode, fuse_matrices


def cosine(a: np.ndarray, b: np.ndarray) -> float:
    """<a, b> / (|a| |b|) in [-1, 1]"""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.shape != b.shape:
        raise ShapeError(f"cosine of vectors with shapes {a.shape} and {b.shape}")
    na, nb = np.linalg.norm(a), np.linalg.norm(b)
    if na == 0 or nb == 0:
        raise DataError("cosine of a zero-norm vector")
    return float(np.clip(np.dot(a, b) / (na * nb), -1.0, 1.0))


@dataclass
class ScoreSet:
    """Scores in trial order with their labels (1 = target)"""

    labels: np.ndarray
    scores: np.ndarray

    def __post_init__(self):
        self.labels = np.asarray(self.labels, dtype=np.int64)
        self.scores = np.asarray(self.scores, dtype=np.float64)
        if self.labels.shape != self.scores.shape:
            raise ShapeError("labels and scores differ in length")
        if not np.all(np.isfinite(self.scores)):
            raise DataError("scores must be finite")

    @classmethod
    def from_lists(cls, target_scores: Sequence[float], nontarget_scores: Sequence[float]) -> "ScoreSet":
        labels = [1] * len(target_scores) + [0] * len(nontarget_scores)
        return cls(np.array(labels), np.array(list(target_scores) + list(nontarget_scores), dtype=np.float64))

    @property
    def target_scores(self) -> np.ndarray:
        return self.scores[self.labels == 1]

    @property
    def nontarget_scores(self) -> np.ndarray:
        return self.scores[self.labels == 0]

    def save(self, path: Path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(f"{l} {s:.6f}\n" for l, s in zip(self.labels, self.scores)), encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "ScoreSet":
        labels, scores = [], []
        for line in Path(path).read_text(encoding="utf-8").splitlines():
            if line.strip():
                label, score = line.split()
                labels.append(int(label))
                scores.append(float(score))
        return cls(np.array(labels), np.array(scores))


def score_pairs(enroll: np.ndarray, test: np.ndarray) -> np.ndarray:
    """Row-wise cosine of two (n, dim) matrices"""
    if enroll.shape != test.shape:
        raise ShapeError(f"enroll {enroll.shape} and test {test.shape} matrices differ")
    e = enroll.astype(np.float64)
    t = test.astype(np.float64)
    ne, nt = np.linalg.norm(e, axis=1), np.linalg.norm(t, axis=1)
    if np.any(ne == 0) or np.any(nt == 0):
        raise DataError("zero-norm embedding in trial scoring")
    return np.clip(np.sum(e * t, axis=1) / (ne * nt), -1.0, 1.0)


def mode_vectors(ids: Sequence[str], mode: FusionMode, child_store: Optional[EmbeddingStore],
                 adult_store: Optional[EmbeddingStore], classifier: Optional[DomainClassifier] = None) -> np.ndarray:
    """Scoring vectors of the given utterances under a fusion mode"""
    if mode is FusionMode.ADULT_ONLY:
        if adult_store is None:
            raise DataError("adult-only scoring needs adult embeddings")
        return adult_store.rows(ids)
    if mode is FusionMode.CHILD_ONLY:
        if child_store is None:
            raise DataError("child-only scoring needs child embeddings")
        return child_store.rows(ids)
    if child_store is None or adult_store is None:
        raise DataError(f"{mode.value} scoring needs child and adult embeddings")
    child, adult = child_store.rows(ids), adult_store.rows(ids)
    posteriors = None
    if mode is FusionMode.AASV:
        if classifier is None:
            raise DataError("AASV scoring needs a domain classifier")
        posteriors = classifier.probabilities(adult)
    return fuse_matrices(child, adult, posteriors)


def score_trials(trials: TrialList, mode: FusionMode = FusionMode.ADULT_ONLY,
                 child_store: Optional[EmbeddingStore] = None, adult_store: Optional[EmbeddingStore] = None,
                 classifier: Optional[DomainClassifier] = None) -> ScoreSet:
    """
    Score every trial with the vectors of the chosen mode

    Raises:
        DataError: empty trial list or an id missing from a store
    """
    trial_list: List[Trial] = list(trials)
    if not trial_list:
        raise DataError("empty trial list")
    ids = list(dict.fromkeys(u for t in trial_list for u in (t.enroll_id, t.test_id)))
    vectors = mode_vectors(ids, mode, child_store, adult_store, classifier)
    index: Dict[str, int] = {u: i for i, u in enumerate(ids)}
    enroll = vectors[[index[t.enroll_id] for t in trial_list]]
    test = vectors[[index[t.test_id] for t in trial_list]]
    return ScoreSet(np.array([t.label for t in trial_list]), score_pairs(enroll, test))


def score_store(trials: TrialList, store: EmbeddingStore) -> ScoreSet:
    """Score trials directly against one store (raw or pre-fused embeddings)"""
    return score_trials(trials, FusionMode.ADULT_ONLY, adult_store=store)
