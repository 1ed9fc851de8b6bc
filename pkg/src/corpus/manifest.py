# src/corpus/manifest.py
"""
Corpus manifest, speaker-disjoint splits and materialization
The manifest is the corpus: every utterance records its seed, so audio can
be regenerated bit-exactly (virtual mode) or written once as WAV files.
"""

import hashlib
import json
import threading
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np

from config.logger import AASVLogger
from config.settings import CORPUS_CONFIG
from src.corpus.speakers import (
    SpeakerProfile, generate_speakers, severity_band, speakers_from_jsonl, speakers_to_jsonl,
)
from src.corpus.synth import UtteranceSpec, synth_utterance
from src.errors import DataError, PrerequisiteError
from src.features.audio_io import read_wav, write_wav
from src.features.filterbank import FilterbankConfig, DEFAULT_FILTERBANK, Waveform, utterance_features

logger = AASVLogger.get_logger(__name__)

SPLITS = ("train", "test", "dc-train")
MANIFEST_FILE = "manifest.jsonl"
SPEAKERS_FILE = "speakers.jsonl"
BAND_ORDER = ("child-young", "child-mid", "child-old")


@dataclass(frozen=True)
class CorpusConfig:
    adult_speakers: int = 40
    child_speakers: int = 40
    utterances_per_speaker: int = 15
    dc_utterances_per_speaker: int = 10
    duration_s: float = 3.0
    sample_rate: int = 16000
    child_severity_range: Tuple[float, float] = (0.2, 1.0)
    dc_severity_threshold: float = 0.55
    test_fraction: float = 0.3
    noise_floor_db_range: Tuple[float, float] = (-45.0, -30.0)
    virtual: bool = False

    @classmethod
    def from_dict(cls, cfg: dict) -> "CorpusConfig":
        kwargs = {k: cfg[k] for k in cls.__dataclass_fields__ if k in cfg}
        for key in ("child_severity_range", "noise_floor_db_range"):
            if key in kwargs:
                kwargs[key] = tuple(kwargs[key])
        return cls(**kwargs)


@dataclass
class ManifestEntry:
    utterance_id: str
    speaker_id: str
    domain: str
    severity: float
    split: str
    seed: Optional[int] = None
    duration_s: float = 3.0
    noise_floor_db: float = -40.0
    path: Optional[str] = None

    @property
    def band(self) -> str:
        return severity_band(self.domain, self.severity)

    def to_json(self) -> str:
        return json.dumps(asdict(self), sort_keys=True)

    def spec(self, sample_rate: int = 16000) -> UtteranceSpec:
        if self.seed is None:
            raise DataError(f"{self.utterance_id}: no seed recorded, cannot regenerate")
        return UtteranceSpec(self.utterance_id, self.speaker_id, self.duration_s,
                             self.noise_floor_db, self.seed, sample_rate)


@dataclass
class Manifest:
    entries: List[ManifestEntry]
    speakers: Dict[str, SpeakerProfile] = field(default_factory=dict)

    def __len__(self):
        return len(self.entries)

    def select(self, split: Optional[str] = None, domain: Optional[str] = None,
               band: Optional[str] = None) -> List[ManifestEntry]:
        return [e for e in self.entries
                if (split is None or e.split == split)
                and (domain is None or e.domain == domain)
                and (band is None or e.band == band)]

    def by_id(self) -> Dict[str, ManifestEntry]:
        return {e.utterance_id: e for e in self.entries}

    def speaker_ids(self, split: Optional[str] = None, domain: Optional[str] = None) -> List[str]:
        seen = {}
        for e in self.select(split, domain):
            seen.setdefault(e.speaker_id, None)
        return list(seen)

    def to_jsonl(self) -> str:
        return "".join(e.to_json() + "\n" for e in self.entries)

    def checksum(self) -> str:
        """SHA-256 over manifest and speaker records"""
        digest = hashlib.sha256(self.to_jsonl().encode("utf-8"))
        digest.update(speakers_to_jsonl(list(self.speakers.values())).encode("utf-8"))
        return digest.hexdigest()

    def save(self, corpus_dir: Path):
        corpus_dir = Path(corpus_dir)
        corpus_dir.mkdir(parents=True, exist_ok=True)
        (corpus_dir / MANIFEST_FILE).write_text(self.to_jsonl(), encoding="utf-8")
        (corpus_dir / SPEAKERS_FILE).write_text(
            speakers_to_jsonl(list(self.speakers.values())), encoding="utf-8")

    @classmethod
    def load(cls, corpus_dir: Path) -> "Manifest":
        corpus_dir = Path(corpus_dir)
        manifest_path = corpus_dir / MANIFEST_FILE
        if not manifest_path.exists():
            raise PrerequisiteError(f"no manifest at {manifest_path}; run 'aasv gen' first")
        entries = [ManifestEntry(**json.loads(line))
                   for line in manifest_path.read_text(encoding="utf-8").splitlines() if line.strip()]
        speakers_path = corpus_dir / SPEAKERS_FILE
        speakers = speakers_from_jsonl(speakers_path.read_text(encoding="utf-8")) if speakers_path.exists() else {}
        return cls(entries, speakers)


def utterance_seed(master_seed: int, speaker_index: int, utterance_index: int) -> int:
    """Independent per-utterance seed from a master seed via a spawn-key counter"""
    seq = np.random.SeedSequence(master_seed, spawn_key=(2, speaker_index, utterance_index))
    return int(seq.generate_state(1, dtype=np.uint32)[0])


def _allocate(total: int, slots: int) -> List[int]:
    base, extra = divmod(total, slots)
    return [base + (1 if i < extra else 0) for i in range(slots)]


def _pick_test_speakers(speakers: List[SpeakerProfile], test_fraction: float,
                        rng: np.random.Generator) -> set:
    """Random test speakers; children are drawn per severity band so every band gets a share"""
    if not speakers:
        return set()
    domain = speakers[0].domain
    n_test = int(round(test_fraction * len(speakers)))
    if n_test < 2 or len(speakers) - n_test < 2:
        raise DataError(f"{domain}: {len(speakers)} speakers cannot give >= 2 train and >= 2 test speakers "
                        f"at test_fraction {test_fraction}")
    if domain == "adult":
        chosen = rng.choice(len(speakers), size=n_test, replace=False)
        return {speakers[i].speaker_id for i in chosen}

    by_band = {name: [s for s in speakers if s.band == name] for name in BAND_ORDER}
    occupied = [name for name in BAND_ORDER if by_band[name]]
    test = set()
    for name, count in zip(occupied, _allocate(n_test, len(occupied))):
        pool = by_band[name]
        if count > len(pool):
            raise DataError(f"band {name} has {len(pool)} speakers, {count} needed for test")
        chosen = rng.choice(len(pool), size=count, replace=False)
        test.update(pool[i].speaker_id for i in chosen)
    return test


def build_splits(speakers: List[SpeakerProfile], cfg: CorpusConfig, seed: int) -> Manifest:
    """
    Assign utterances to train / test / dc-train

    Test speakers are disjoint from train speakers within each domain.
    dc-train holds extra utterances of train speakers: every adult and
    only children with severity >= cfg.dc_severity_threshold.
    """
    rng = np.random.default_rng(np.random.SeedSequence(seed, spawn_key=(3,)))
    test_ids = set()
    for domain in ("adult", "child"):
        test_ids |= _pick_test_speakers([s for s in speakers if s.domain == domain], cfg.test_fraction, rng)

    entries = []
    for s_index, speaker in enumerate(speakers):
        split = "test" if speaker.speaker_id in test_ids else "train"
        n_dc = 0
        if split == "train" and (speaker.domain == "adult" or speaker.severity >= cfg.dc_severity_threshold):
            n_dc = cfg.dc_utterances_per_speaker
        total = cfg.utterances_per_speaker + n_dc
        for u_index in range(total):
            u_seed = utterance_seed(seed, s_index, u_index)
            noise_db = float(np.random.default_rng(u_seed).uniform(*cfg.noise_floor_db_range))
            entries.append(ManifestEntry(
                utterance_id=f"{speaker.speaker_id}-{u_index:03d}",
                speaker_id=speaker.speaker_id,
                domain=speaker.domain,
                severity=speaker.severity,
                split=split if u_index < cfg.utterances_per_speaker else "dc-train",
                seed=u_seed,
                duration_s=cfg.duration_s,
                noise_floor_db=round(noise_db, 4),
            ))
    logger.info(f"Built splits: {len(entries)} utterances, {len(test_ids)} test speakers")
    return Manifest(entries, {s.speaker_id: s for s in speakers})


class CorpusLoader:
    """Waveform and feature access for manifest entries (WAV on disk or regenerated from seed)"""

    def __init__(self, manifest: Manifest, corpus_dir: Optional[Path] = None,
                 fb: FilterbankConfig = DEFAULT_FILTERBANK, cache_features: bool = True):
        self.manifest = manifest
        self.corpus_dir = Path(corpus_dir) if corpus_dir is not None else None
        self.fb = fb
        self.cache_features = cache_features
        self._features: Dict[str, np.ndarray] = {}
        self._lock = threading.Lock()

    def waveform(self, entry: ManifestEntry) -> Waveform:
        if entry.path is not None and self.corpus_dir is not None:
            path = self.corpus_dir / entry.path
            if path.exists():
                return read_wav(path, self.fb.sample_rate)
            if entry.seed is None:
                raise PrerequisiteError(f"missing audio file {path}")
        profile = self.manifest.speakers.get(entry.speaker_id)
        if profile is None:
            raise DataError(f"{entry.utterance_id}: unknown speaker {entry.speaker_id}")
        return synth_utterance(profile, entry.spec(self.fb.sample_rate))

    def features(self, entry: ManifestEntry) -> np.ndarray:
        """Clean logmel + cmn features"""
        with self._lock:
            cached = self._features.get(entry.utterance_id)
        if cached is not None:
            return cached
        feats = utterance_features(self.waveform(entry), self.fb)
        if self.cache_features:
            with self._lock:
                self._features[entry.utterance_id] = feats
        return feats


def generate_corpus(cfg: CorpusConfig, seed: int, corpus_dir: Path, threads: int = 1,
                    virtual: Optional[bool] = None) -> Manifest:
    """
    Sample speakers, build splits, write audio (unless virtual) and the manifest

    Returns:
        the saved Manifest; reruns with the same seed give the same checksum
    """
    virtual = cfg.virtual if virtual is None else virtual
    corpus_dir = Path(corpus_dir)
    corpus_dir.mkdir(parents=True, exist_ok=True)
    speakers = generate_speakers(cfg.adult_speakers, cfg.child_speakers, cfg.child_severity_range, seed)
    manifest = build_splits(speakers, cfg, seed)

    if not virtual:
        for entry in manifest.entries:
            entry.path = f"audio/{entry.speaker_id}/{entry.utterance_id}.wav"
        loader = CorpusLoader(manifest, None)

        def _render(entry: ManifestEntry):
            write_wav(corpus_dir / entry.path, loader.waveform(entry))

        with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
            list(pool.map(_render, manifest.entries))

    manifest.save(corpus_dir)
    logger.info(f"Corpus written to {corpus_dir} ({'virtual' if virtual else 'wav'}), "
                f"checksum {manifest.checksum()[:12]}")
    return manifest


def entries_by_speaker(entries: Iterable[ManifestEntry]) -> Dict[str, List[ManifestEntry]]:
    groups: Dict[str, List[ManifestEntry]] = {}
    for e in entries:
        groups.setdefault(e.speaker_id, []).append(e)
    return groups
