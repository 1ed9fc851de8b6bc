"""Speaker encoder: network, training, fine-tuning, checkpoints, weight merging"""

from src.encoder.tdnn import (
    DEFAULT_ARCHITECTURE, ClassificationHead, Embedding, EncoderArchitecture, SpeakerEncoder,
)
from src.encoder.trainer import (
    SpeakerDataset, TrainConfig, TrainingLog, evaluate_accuracy, finetune, train_encoder,
    training_features,
)
from src.encoder.checkpoint import load_checkpoint, load_encoder, save_checkpoint, save_encoder
from src.encoder.merge import wse_merge, wse_sweep
from src.encoder.embedding_store import EmbeddingStore, augmented_embeddings, extract_embeddings
