# src/domain/separability.py
"""
How well frozen-encoder embeddings separate children from adults
Cosine silhouette of the two domains and a held-out linear classifier accuracy,
optionally restricted to one child severity band.
"""

from typing import Dict, Optional, Sequence

import numpy as np
from sklearn.linear_model import LogisticRegression
from sklearn.metrics import silhouette_samples
from sklearn.model_selection import train_test_split

from src.corpus.manifest import ManifestEntry
from src.domain.classifier import ADULT, CHILD
from src.encoder.embedding_store import EmbeddingStore
from src.errors import DataError


def domain_silhouette(x: np.ndarray, labels: np.ndarray) -> float:
    """
    Cosine silhouette averaged per domain, then across the two domains

    Each domain counts once whatever its utterance count, so a large adult
    test set does not drown out a single child band.
    """
    labels = np.asarray(labels)
    if np.unique(labels).size != 2:
        raise DataError("silhouette needs exactly two domains")
    per_sample = silhouette_samples(x, labels, metric="cosine")
    return float(np.mean([per_sample[labels == c].mean() for c in np.unique(labels)]))


def linear_separability(x: np.ndarray, labels: np.ndarray, seed: int = 0, test_size: float = 0.3) -> float:
    """Held-out accuracy of logistic regression on unit-normalized embeddings"""
    x = x / np.linalg.norm(x, axis=1, keepdims=True)
    x_train, x_test, y_train, y_test = train_test_split(
        x, labels, test_size=test_size, random_state=seed, stratify=labels)
    model = LogisticRegression(max_iter=1000)
    model.fit(x_train, y_train)
    return float(model.score(x_test, y_test))


def _labelled(store: EmbeddingStore, adults: Sequence[ManifestEntry], children: Sequence[ManifestEntry]):
    if not adults or not children:
        raise DataError("separability needs adult and child utterances")
    x = store.rows([e.utterance_id for e in adults] + [e.utterance_id for e in children])
    y = np.array([ADULT] * len(adults) + [CHILD] * len(children))
    return x, y


def band_separability(store: EmbeddingStore, entries: Sequence[ManifestEntry], band: Optional[str] = None,
                      seed: int = 0) -> Dict[str, float]:
    """
    Separability of adults against children (of one band when given)

    Returns:
        {"silhouette": ..., "linear_accuracy": ..., "children": n, "adults": n}
    """
    adults = [e for e in entries if e.domain == "adult"]
    children = [e for e in entries if e.domain == "child" and (band is None or e.band == band)]
    x, y = _labelled(store, adults, children)
    return {
        "silhouette": domain_silhouette(x, y),
        "linear_accuracy": linear_separability(x, y, seed),
        "children": len(children),
        "adults": len(adults),
    }
