"""Command-line orchestration of the verification pipeline"""

from src.cli.experiment import ExperimentConfig, derive_seed, load_experiment_config
from src.cli.stages import Pipeline, cmd_embed, cmd_eval, cmd_finetune, cmd_fuse, cmd_gen, cmd_train, cmd_train_dc
from src.cli.pattern import PatternSummary, cmd_reproduce_pattern
