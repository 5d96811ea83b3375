"""Small numpy-backed autodiff stack used by every model in the package."""

from . import ops
from .checkpoint import CheckpointError, load_checkpoint, save_checkpoint
from .layers import (
    BiGRU,
    Embedding,
    GRU,
    GRUCell,
    LayerNorm,
    Linear,
    Module,
    MultiHeadAttention,
    TransformerBlock,
    bigru,
    gru_cell,
    sinusoidal_positions,
    transformer_block,
)
from .optim import Adam, AdamHyper, AdamState, adam_step
from .tensor import Tensor, default_dtype, no_grad

__all__ = [
    "Adam", "AdamHyper", "AdamState", "BiGRU", "CheckpointError", "Embedding", "GRU",
    "GRUCell", "LayerNorm", "Linear", "Module", "MultiHeadAttention", "Tensor",
    "TransformerBlock", "adam_step", "bigru", "default_dtype", "gru_cell", "load_checkpoint",
    "no_grad", "ops", "save_checkpoint", "sinusoidal_positions", "transformer_block",
]
