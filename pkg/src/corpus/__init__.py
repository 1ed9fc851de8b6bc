"""Synthetic two-domain speaker corpus and trial lists"""

from src.corpus.speakers import SpeakerProfile, gen_speaker, generate_speakers, severity_band
from src.corpus.synth import UtteranceSpec, apply_envelope, syllable_plan, synth_utterance
from src.corpus.manifest import (
    CorpusConfig, CorpusLoader, Manifest, ManifestEntry, build_splits, generate_corpus,
)
from src.corpus.trials import Trial, TrialList, build_trials
