# src/corpus/trials.py
"""
Verification trial lists
Positives pair two utterances of one speaker, negatives pair utterances of
two different speakers of the same domain. No unordered pair repeats.
"""

from dataclasses import dataclass
from itertools import combinations
from pathlib import Path
from typing import List, Optional, Tuple

import numpy as np

from src.corpus.manifest import Manifest, entries_by_speaker
from src.errors import DataError


@dataclass(frozen=True)
class Trial:
    label: int
    enroll_id: str
    test_id: str

    def __post_init__(self):
        if self.label not in (0, 1):
            raise DataError(f"trial label must be 0 or 1, got {self.label}")
        if self.enroll_id == self.test_id:
            raise DataError(f"trial pairs utterance {self.enroll_id} with itself")


@dataclass
class TrialList:
    trials: List[Trial]

    def __len__(self):
        return len(self.trials)

    def __iter__(self):
        return iter(self.trials)

    @property
    def n_pos(self) -> int:
        return sum(t.label for t in self.trials)

    @property
    def n_neg(self) -> int:
        return len(self.trials) - self.n_pos

    def save(self, path: Path):
        path = Path(path)
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("".join(f"{t.label} {t.enroll_id} {t.test_id}\n" for t in self.trials),
                        encoding="utf-8")

    @classmethod
    def load(cls, path: Path) -> "TrialList":
        trials = []
        for number, line in enumerate(Path(path).read_text(encoding="utf-8").splitlines(), 1):
            if not line.strip():
                continue
            parts = line.split()
            if len(parts) != 3 or parts[0] not in ("0", "1"):
                raise DataError(f"{path}:{number}: expected 'label enroll_id test_id'")
            trials.append(Trial(int(parts[0]), parts[1], parts[2]))
        return cls(trials)


def _positive_pairs(groups) -> List[Tuple[str, str]]:
    pairs = []
    for entries in groups.values():
        pairs.extend((a.utterance_id, b.utterance_id) for a, b in combinations(entries, 2))
    return pairs


def _negative_pairs(groups) -> List[Tuple[str, str]]:
    pairs = []
    speakers = list(groups)
    for i, j in combinations(range(len(speakers)), 2):
        first, second = groups[speakers[i]], groups[speakers[j]]
        if first[0].domain != second[0].domain:
            continue
        pairs.extend((a.utterance_id, b.utterance_id) for a in first for b in second)
    return pairs


def build_trials(manifest: Manifest, split: str, n_pos: int, n_neg: int, rng: np.random.Generator,
                 domain: Optional[str] = None, band: Optional[str] = None) -> TrialList:
    """
    Sample exactly n_pos target and n_neg nontarget trials from one split

    Args:
        manifest: corpus manifest
        split: split tag to draw utterances from
        n_pos, n_neg: requested counts
        rng: sampling generator
        domain, band: optional filters on the utterances

    Raises:
        DataError: fewer than 2 speakers with 2 utterances, or fewer distinct
            pairs than requested
    """
    groups = entries_by_speaker(manifest.select(split, domain, band))
    groups = {k: v for k, v in groups.items() if len(v) >= 2}
    if len(groups) < 2:
        raise DataError(f"split '{split}' ({domain or 'any'}/{band or 'any'}) needs >= 2 speakers "
                        f"with >= 2 utterances, found {len(groups)}")

    positives = _positive_pairs(groups)
    negatives = _negative_pairs(groups)
    if n_pos > len(positives):
        raise DataError(f"requested {n_pos} positive trials, only {len(positives)} distinct pairs exist")
    if n_neg > len(negatives):
        raise DataError(f"requested {n_neg} negative trials, only {len(negatives)} distinct pairs exist")

    pos_idx = rng.choice(len(positives), size=n_pos, replace=False)
    neg_idx = rng.choice(len(negatives), size=n_neg, replace=False)
    trials = [Trial(1, *positives[i]) for i in pos_idx] + [Trial(0, *negatives[i]) for i in neg_idx]
    order = rng.permutation(len(trials))
    return TrialList([trials[i] for i in order])
