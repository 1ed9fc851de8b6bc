# src/domain/ratio_harness.py
"""
Data-ratio experiment for the domain classifier
The child training set is fixed; the adult training set grows by whole
speakers with each ratio. Every classifier is scored on the same held-out
adult and child test utterances.
"""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple

import numpy as np
import pandas as pd

from config.logger import AASVLogger
from config.settings import RATIO_CONFIG
from src.corpus.manifest import Manifest, ManifestEntry, entries_by_speaker
from src.domain.classifier import ADULT, CHILD, DomainConfig, train_domain_classifier
from src.domain.metrics import accuracy
from src.encoder.embedding_store import EmbeddingStore
from src.errors import ConfigError, DataError

logger = AASVLogger.get_logger(__name__)

TSV_COLUMNS = ["ratio", "adult_utts", "child_utts", "adult_acc", "child_acc"]


@dataclass(frozen=True)
class RatioConfig:
    adult_multipliers: Tuple[int, ...] = (1, 2, 3, 5)
    child_count: int = 40
    seed: int = 0

    def __post_init__(self):
        if not self.adult_multipliers:
            raise ConfigError("ratio list is empty")
        if self.child_count < 1 or min(self.adult_multipliers) < 1:
            raise ConfigError("ratio counts must be >= 1")

    @classmethod
    def from_dict(cls, cfg: dict, seed: Optional[int] = None) -> "RatioConfig":
        return cls(tuple(int(m) for m in cfg.get("adult_multipliers", (1, 2, 3, 5))),
                   int(cfg.get("child_count", 40)),
                   int(seed if seed is not None else cfg.get("seed", 0)))

    @property
    def pairs(self) -> List[Tuple[int, int]]:
        return [(m * self.child_count, self.child_count) for m in self.adult_multipliers]


DEFAULT_RATIO = RatioConfig.from_dict(RATIO_CONFIG)


def _speaker_ordered(entries: Sequence[ManifestEntry], rng: np.random.Generator) -> List[str]:
    """Utterance ids grouped by speaker, speakers in a seeded random order"""
    groups = entries_by_speaker(entries)
    speakers = list(groups)
    return [e.utterance_id for i in rng.permutation(len(speakers)) for e in groups[speakers[i]]]


def ratio_pools(manifest: Manifest, dc_threshold: float):
    """(adult train, child train, adult test, child test) entries for the harness"""
    adult_train = [e for e in manifest.entries if e.domain == "adult" and e.split in ("train", "dc-train")]
    child_train = [e for e in manifest.select("dc-train", "child") if e.severity >= dc_threshold]
    adult_test = manifest.select("test", "adult")
    child_test = [e for e in manifest.select("test", "child") if e.severity >= dc_threshold]
    return adult_train, child_train, adult_test, child_test


def ratio_harness(cfg: RatioConfig, store: EmbeddingStore, manifest: Manifest,
                  domain_cfg: DomainConfig, dc_threshold: float = 0.55) -> pd.DataFrame:
    """
    Train one classifier per adult:child ratio

    Args:
        cfg: ratios and the fixed child utterance count
        store: frozen-encoder embeddings covering all pool utterances
        manifest: corpus manifest
        domain_cfg: classifier settings (held-out split comes from the test pools)
        dc_threshold: minimum child severity used for child train and test data

    Returns:
        one row per ratio with columns ratio, adult_utts, child_utts, adult_acc, child_acc
    """
    rng = np.random.default_rng(np.random.SeedSequence(cfg.seed, spawn_key=(23,)))
    adult_train, child_train, adult_test, child_test = ratio_pools(manifest, dc_threshold)
    if not adult_test or not child_test:
        raise DataError("ratio harness needs adult and child test utterances")

    adult_order = _speaker_ordered(adult_train, rng)
    child_order = [child_train[i].utterance_id for i in rng.permutation(len(child_train))]
    needed_adult = max(a for a, _ in cfg.pairs)
    if len(child_order) < cfg.child_count or len(adult_order) < needed_adult:
        raise DataError(f"corpus too small for ratio harness: {len(adult_order)} adult / {len(child_order)} "
                        f"child utterances, need {needed_adult} / {cfg.child_count}")

    x_adult_test = store.rows([e.utterance_id for e in adult_test])
    x_child_test = store.rows([e.utterance_id for e in child_test])
    x_test = np.concatenate([x_adult_test, x_child_test])
    y_test = np.array([ADULT] * len(adult_test) + [CHILD] * len(child_test))

    child_ids = child_order[:cfg.child_count]
    rows = []
    for multiplier, (n_adult, n_child) in zip(cfg.adult_multipliers, cfg.pairs):
        adult_ids = adult_order[:n_adult]
        x = store.rows(adult_ids + child_ids)
        y = np.array([ADULT] * n_adult + [CHILD] * n_child)
        result = train_domain_classifier(x, y, domain_cfg, x_test, y_test)
        model = result.classifier
        rows.append({
            "ratio": f"{multiplier}:1",
            "adult_utts": n_adult,
            "child_utts": n_child,
            "adult_acc": accuracy(model.predict(x_adult_test), np.full(len(adult_test), ADULT)),
            "child_acc": accuracy(model.predict(x_child_test), np.full(len(child_test), CHILD)),
        })
        logger.info(f"ratio {multiplier}:1 -> adult acc {rows[-1]['adult_acc']:.3f}, "
                    f"child acc {rows[-1]['child_acc']:.3f}")
    return pd.DataFrame(rows, columns=TSV_COLUMNS)


def write_ratio_table(table: pd.DataFrame, path: Path):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(path, sep="\t", index=False, columns=TSV_COLUMNS, float_format="%.4f",
                 encoding="utf-8", lineterminator="\n")
