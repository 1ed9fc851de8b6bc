# src/evaluation/eer.py
"""
Equal Error Rate
Accept rule: score >= threshold. FRR(t) is the fraction of target scores
below t, FAR(t) the fraction of nontarget scores at or above t. Operating
points sit below the lowest score, at midpoints between consecutive
distinct scores and above the highest score; the EER is read where
FAR - FRR first reaches 0, interpolating linearly between the two
operating points around the sign change.
"""

from typing import List, Sequence, Tuple

import numpy as np

from src.errors import DataError
from src.evaluation.scoring import ScoreSet


def _checked(s: ScoreSet) -> Tuple[np.ndarray, np.ndarray]:
    targets = np.sort(np.asarray(s.target_scores, dtype=np.float64))
    nontargets = np.sort(np.asarray(s.nontarget_scores, dtype=np.float64))
    if targets.size == 0 or nontargets.size == 0:
        raise DataError("EER needs at least one target and one nontarget score")
    if not (np.all(np.isfinite(targets)) and np.all(np.isfinite(nontargets))):
        raise DataError("EER scores must be finite")
    return targets, nontargets


def _crossing(thresholds: Sequence[float], frr: Sequence[float], far: Sequence[float]) -> Tuple[float, float]:
    diff = [a - r for a, r in zip(far, frr)]
    for i, d in enumerate(diff):
        if d <= 0:
            break
    if diff[i] == 0 or i == 0:
        return frr[i], thresholds[i]
    w = diff[i - 1] / (diff[i - 1] - diff[i])
    value = frr[i - 1] + w * (frr[i] - frr[i - 1])
    threshold = thresholds[i - 1] + w * (thresholds[i] - thresholds[i - 1])
    return float(value), float(threshold)


def eer(s: ScoreSet) -> Tuple[float, float]:
    """
    Returns:
        (eer as a fraction in [0, 1], interpolated threshold)
    """
    targets, nontargets = _checked(s)
    distinct = np.unique(np.concatenate([targets, nontargets]))
    thresholds = np.concatenate([[distinct[0] - 1.0], (distinct[:-1] + distinct[1:]) / 2.0, [distinct[-1] + 1.0]])
    frr = np.searchsorted(targets, thresholds, side="left") / targets.size
    far = (nontargets.size - np.searchsorted(nontargets, thresholds, side="left")) / nontargets.size
    return _crossing(thresholds.tolist(), frr.tolist(), far.tolist())


def eer_bruteforce(s: ScoreSet) -> float:
    """Exhaustive O(n^2) reference: error rates counted at every distinct score +/- epsilon"""
    targets, nontargets = _checked(s)
    target_list, nontarget_list = targets.tolist(), nontargets.tolist()
    distinct = sorted(set(target_list) | set(nontarget_list))
    gaps = [b - a for a, b in zip(distinct, distinct[1:])]
    epsilon = min(gaps) / 4.0 if gaps else 0.5

    candidates: List[float] = [distinct[0] - 1.0, distinct[-1] + 1.0]
    for v in distinct:
        candidates += [v - epsilon, v + epsilon]
    candidates.sort()

    frr, far = [], []
    for t in candidates:
        frr.append(sum(1 for x in target_list if x < t) / len(target_list))
        far.append(sum(1 for x in nontarget_list if x >= t) / len(nontarget_list))
    value, _ = _crossing(candidates, frr, far)
    return value
