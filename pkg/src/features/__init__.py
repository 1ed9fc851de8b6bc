"""Log-mel features, augmentation and audio IO"""

from src.features.filterbank import (
    DEFAULT_FILTERBANK, FilterbankConfig, Waveform, cmn, crop_or_pad, logmel, mel_filterbank,
    num_frames, utterance_features,
)
from src.features.augment import (
    DEFAULT_AUGMENT, AugmentConfig, add_noise, add_reverb, apply_freq_mask, apply_time_mask,
    augment, augmented_features, synthetic_rir,
)
from src.features.audio_io import load_features, read_wav, save_features, write_wav
