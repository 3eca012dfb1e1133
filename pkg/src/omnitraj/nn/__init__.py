from .tensor import (
    Parameter,
    Tensor,
    concat,
    gelu,
    l2_normalize,
    log_softmax,
    no_grad,
    set_finite_checks,
    softmax,
)
from .layers import (
    Embedding,
    FeedForward,
    LayerNorm,
    Linear,
    Module,
    MultiHeadSelfAttention,
    TransformerBlock,
    linear_forward,
    rope_angles,
    rope_rotate,
)
from .optim import Adam
from .gradcheck import grad_check
from .checkpoint import (
    deserialize_weights,
    load_checkpoint,
    save_checkpoint,
    serialize_weights,
    weights_fingerprint,
)

__all__ = [
    "Adam",
    "Embedding",
    "FeedForward",
    "LayerNorm",
    "Linear",
    "Module",
    "MultiHeadSelfAttention",
    "Parameter",
    "Tensor",
    "TransformerBlock",
    "concat",
    "deserialize_weights",
    "gelu",
    "grad_check",
    "l2_normalize",
    "linear_forward",
    "load_checkpoint",
    "log_softmax",
    "no_grad",
    "rope_angles",
    "rope_rotate",
    "save_checkpoint",
    "serialize_weights",
    "set_finite_checks",
    "softmax",
    "weights_fingerprint",
]
