# config/settings.py
"""
Configuration and constants for the Age Agnostic Speaker Verification toolkit
"""

import os
from pathlib import Path

# Project paths
PROJECT_ROOT = Path(__file__).parent.parent
SRC_DIR = PROJECT_ROOT / "src"
DATA_DIR = PROJECT_ROOT / "data"
MODELS_DIR = PROJECT_ROOT / "checkpoints"
REPORTS_DIR = PROJECT_ROOT / "reports"
LOGS_DIR = Path(os.environ.get("AASV_LOG_DIR", PROJECT_ROOT / "logs"))

# Create logs directory if it doesn't exist
LOGS_DIR.mkdir(parents=True, exist_ok=True)

# Environment variable holding the default experiment config path
CONFIG_ENV_VAR = "AASV_CONFIG"

# ============ CORPUS SETTINGS ============
CORPUS_CONFIG = {
    "adult_speakers": 40,
    "child_speakers": 40,
    "utterances_per_speaker": 15,
    "dc_utterances_per_speaker": 10,  # extra utterances tagged dc-train
    "duration_s": 3.0,
    "sample_rate": 16000,
    "child_severity_range": [0.2, 1.0],
    "dc_severity_threshold": 0.55,
    "test_fraction": 0.3,
    "noise_floor_db_range": [-45.0, -30.0],
    "virtual": False,
}

# Severity bands used to emulate year-wise test columns (youngest first)
SEVERITY_BANDS = {
    "child-young": [0.7333333333333333, 1.0],
    "child-mid": [0.4666666666666667, 0.7333333333333333],
    "child-old": [0.2, 0.4666666666666667],
}

# ============ FEATURE SETTINGS ============
FEATURE_CONFIG = {
    "sample_rate": 16000,
    "window_ms": 25.0,
    "hop_ms": 10.0,
    "n_fft": 512,
    "n_mels": 80,
    "f_min": 20.0,
    "f_max": None,  # None means sample_rate / 2
    "log_floor": 1e-10,
}

AUGMENT_CONFIG = {
    "snr_db_range": [5.0, 20.0],
    "rir_decay_ms": 150.0,
    "freq_mask_max": 10,
    "time_mask_max": 20,
    "mask_value": 0.0,
}

# ============ ENCODER SETTINGS ============
ENCODER_CONFIG = {
    "input_dim": 80,
    "channels": 64,
    "kernel_sizes": [5, 3, 3],
    "dilations": [1, 2, 3],
    "bottleneck_channels": 128,
    "embedding_dim": 64,
    "bn_momentum": 0.9,
    "bn_eps": 1e-5,
}

# Adult-domain training from scratch
TRAIN_CONFIG = {
    "epochs": 30,
    "batch_size": 16,
    "crop_frames": 198,  # 2 s at a 10 ms hop
    "base_lr": 1e-8,
    "max_lr": 2e-3,
    "cycle_steps": None,  # None means two epochs per cycle
    "weight_decay": 2e-6,
    "beta1": 0.9,
    "beta2": 0.999,
    "epsilon": 1e-8,
    "aam_scale": 30.0,
    "aam_margin": 0.2,
    "augment_prob": 0.5,
}

# Child-domain fine-tuning
FINETUNE_CONFIG = dict(TRAIN_CONFIG, epochs=20)

# ============ DOMAIN CLASSIFIER SETTINGS ============
DOMAIN_CONFIG = {
    "hidden": 32,
    "epochs": 60,
    "batch_size": 32,
    "base_lr": 1e-8,
    "max_lr": 5e-3,
    "weight_decay": 2e-6,
    "test_fraction": 0.2,
    "augmented_copies": 1,
    "class_balanced": True,  # inverse-frequency class weights in the loss
}

RATIO_CONFIG = {
    "adult_multipliers": [1, 2, 3, 5],
    "child_count": 40,
}

# ============ EVALUATION SETTINGS ============
EVAL_CONFIG = {
    "n_pos": 400,
    "n_neg": 400,
    "systems": ["A-SV", "C-SV", "AASV", "w/o DC", "WSE"],
    "wse_alpha": 0.5,
    "excluded_cells": [],  # entries of the form "system|test_set"
}

# Tolerances of the reproduce-pattern acceptance checks (absolute EER points)
PATTERN_CONFIG = {
    "asv_domain_gap": 10.0,
    "forgetting_gap": 5.0,
    "aasv_tolerance": 2.0,
    "without_dc_gap": 2.0,
    "ratio_child_min_acc": 0.95,
    "dc_min_balanced_acc": 0.95,
    "dc_min_f1": 0.95,
    "min_silhouette": 0.3,
}

# ============ RUNTIME SETTINGS ============
RUNTIME_CONFIG = {
    "threads": None,  # None means physical cores capped at max_threads
    "max_threads": 8,
    "seed": 20250601,
}

# ============ LOGGING SETTINGS ============
LOGGING_CONFIG = {
    "level": os.environ.get("AASV_LOG_LEVEL", "INFO"),
    "format": "%(asctime)s - %(name)s - %(levelname)s - %(message)s",
    "log_file": str(LOGS_DIR / "aasv.log"),
    "max_bytes": 10485760,  # 10MB
    "backup_count": 5,
}


def default_sections() -> dict:
    """Return deep copies of every configurable section, keyed by section name"""
    import copy

    return copy.deepcopy({
        "corpus": CORPUS_CONFIG,
        "features": FEATURE_CONFIG,
        "augment": AUGMENT_CONFIG,
        "encoder": ENCODER_CONFIG,
        "train": TRAIN_CONFIG,
        "finetune": FINETUNE_CONFIG,
        "domain": DOMAIN_CONFIG,
        "ratio": RATIO_CONFIG,
        "eval": EVAL_CONFIG,
        "pattern": PATTERN_CONFIG,
        "runtime": RUNTIME_CONFIG,
        "paths": {
            "corpus_dir": str(DATA_DIR / "corpus"),
            "checkpoints_dir": str(MODELS_DIR),
            "report_dir": str(REPORTS_DIR),
        },
    })


def print_config():
    """Print all configuration settings"""
    print("=" * 60)
    print("AGE AGNOSTIC SPEAKER VERIFICATION - CONFIGURATION")
    print("=" * 60)
    print(f"Project Root: {PROJECT_ROOT}")
    print(f"Data Directory: {DATA_DIR}")
    print(f"Checkpoints Directory: {MODELS_DIR}")
    print(f"Reports Directory: {REPORTS_DIR}")
    print(f"Logs Directory: {LOGS_DIR}")
    print("\nCorpus:")
    print(f"  Speakers: {CORPUS_CONFIG['adult_speakers']} adult / {CORPUS_CONFIG['child_speakers']} child")
    print(f"  Utterances per speaker: {CORPUS_CONFIG['utterances_per_speaker']}")
    print(f"  DC severity threshold: {CORPUS_CONFIG['dc_severity_threshold']}")
    print("\nEncoder:")
    print(f"  Channels: {ENCODER_CONFIG['channels']} -> {ENCODER_CONFIG['bottleneck_channels']}")
    print(f"  Embedding dim: {ENCODER_CONFIG['embedding_dim']}")
    print("\nTraining:")
    print(f"  Adult epochs: {TRAIN_CONFIG['epochs']}  Fine-tune epochs: {FINETUNE_CONFIG['epochs']}")
    print(f"  LR: {TRAIN_CONFIG['base_lr']} -> {TRAIN_CONFIG['max_lr']} (cyclic)")
    print(f"  AAM: s={TRAIN_CONFIG['aam_scale']} m={TRAIN_CONFIG['aam_margin']}")
    print("\nEvaluation:")
    print(f"  Trials per test set: {EVAL_CONFIG['n_pos']} / {EVAL_CONFIG['n_neg']}")
    print(f"  Systems: {', '.join(EVAL_CONFIG['systems'])}")
    print("=" * 60)


if __name__ == "__main__":
    print_config()
