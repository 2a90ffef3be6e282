from .tensor import (
    Tensor,
    concat,
    cross_entropy,
    embedding,
    log_softmax,
    no_grad,
    softmax,
)
from .modules import (
    Dropout,
    Embedding,
    LayerNorm,
    Linear,
    Module,
    MultiHeadSelfAttention,
    Parameter,
    PositionEmbedding,
    TransformerBlock,
    TransformerConfig,
    TransformerStack,
    causal_mask,
    gelu,
    init_normal,
)
from .optim import Adam, adam_step, epoch_lr_factor
from .checkpoint import (
    FORMAT_VERSION,
    MAGIC,
    decode_json,
    encode_json,
    load_checkpoint,
    save_checkpoint,
)

__all__ = [
    "Tensor",
    "concat",
    "cross_entropy",
    "embedding",
    "log_softmax",
    "no_grad",
    "softmax",
    "Dropout",
    "Embedding",
    "LayerNorm",
    "Linear",
    "Module",
    "MultiHeadSelfAttention",
    "Parameter",
    "PositionEmbedding",
    "TransformerBlock",
    "TransformerConfig",
    "TransformerStack",
    "causal_mask",
    "gelu",
    "init_normal",
    "Adam",
    "adam_step",
    "epoch_lr_factor",
    "FORMAT_VERSION",
    "MAGIC",
    "decode_json",
    "encode_json",
    "load_checkpoint",
    "save_checkpoint",
]
