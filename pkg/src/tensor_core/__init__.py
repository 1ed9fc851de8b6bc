"""Dense numerical kernel: tensors, layers, losses, optimizer, schedule"""

from src.tensor_core.tensor import DTYPE, Parameter, as_tensor, check_finite
from src.tensor_core.layers import (
    BatchNorm1d, Conv1d, Dense, Layer, ReLU, StatsPooling, conv1d_forward, dense_forward,
)
from src.tensor_core.losses import (
    AamConfig, AamSoftmaxLoss, aam_logits, batch_softmax_cross_entropy, softmax_cross_entropy,
)
from src.tensor_core.optim import Adam, AdamState, CyclicLrSchedule, adam_step, lr_at
from src.tensor_core.gradcheck import finite_diff_check
