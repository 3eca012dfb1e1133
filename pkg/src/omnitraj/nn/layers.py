"""Neural layers shared by the four modality encoders.

Blocks are pre-norm residual transformers: x + MHSA(LN(x)) followed by
x + FFN(LN(x)), with an optional rotary position rotation applied to
queries and keys before scoring. Padded key positions receive -inf
attention scores, the single padding convention used everywhere.
"""

from __future__ import annotations

import numpy as np

from ..errors import ShapeError
from .tensor import Parameter, Tensor, concat, gelu, softmax

MASK_NEG = -1e30


def _named(obj, prefix: str, out: dict):
    if isinstance(obj, Parameter):
        out[prefix] = obj
    elif isinstance(obj, Module):
        for name, value in vars(obj).items():
            _named(value, f"{prefix}.{name}" if prefix else name, out)
    elif isinstance(obj, (list, tuple)):
        for i, value in enumerate(obj):
            _named(value, f"{prefix}.{i}", out)
    elif isinstance(obj, dict):
        for key, value in obj.items():
            _named(value, f"{prefix}.{key}", out)


class Module:
    """Minimal parameter container with named traversal."""

    def named_parameters(self) -> dict[str, Parameter]:
        out: dict[str, Parameter] = {}
        _named(self, "", out)
        return out

    def parameters(self) -> list[Parameter]:
        return list(self.named_parameters().values())

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.zero_grad()

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, bias: bool = True):
        scale = 1.0 / np.sqrt(in_dim)
        self.weight = Parameter(rng.uniform(-scale, scale, size=(in_dim, out_dim)))
        self.bias = Parameter(np.zeros(out_dim)) if bias else None

    def forward(self, x: Tensor) -> Tensor:
        if x.shape[-1] != self.weight.shape[0]:
            raise ShapeError(f"linear expects width {self.weight.shape[0]}, got {x.shape[-1]}")
        out = x @ self.weight
        if self.bias is not None:
            out = out + self.bias
        return out


def linear_forward(x: Tensor, weight: Tensor, bias: Tensor | None = None) -> Tensor:
    """Affine map x @ W + b with gradients for all three operands."""
    if x.shape[-1] != weight.shape[0]:
        raise ShapeError(f"linear expects width {weight.shape[0]}, got {x.shape[-1]}")
    out = x @ weight
    return out if bias is None else out + bias


class Embedding(Module):
    def __init__(self, vocab: int, dim: int, rng: np.random.Generator):
        self.weight = Parameter(rng.normal(0.0, 0.02, size=(vocab, dim)))

    def forward(self, ids: np.ndarray) -> Tensor:
        return self.weight[np.asarray(ids, dtype=np.int64)]


class LayerNorm(Module):
    def __init__(self, dim: int, eps: float = 1e-5):
        self.gamma = Parameter(np.ones(dim))
        self.beta = Parameter(np.zeros(dim))
        self.eps = eps

    def forward(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        return centered / (var + self.eps) ** 0.5 * self.gamma + self.beta


def rope_angles(positions: np.ndarray, dim: int, base: float = 10000.0) -> np.ndarray:
    """Rotation angle per (position, plane): pos / base^(2k/d)."""
    if dim % 2 != 0:
        raise ShapeError("rotary rotation needs an even width")
    k = np.arange(dim // 2, dtype=np.float64)
    inv_freq = base ** (-2.0 * k / dim)
    return np.asarray(positions, dtype=np.float64)[:, None] * inv_freq[None, :]


def rope_rotate(e: Tensor, base: float = 10000.0, positions: np.ndarray | None = None) -> Tensor:
    """Rotate each 2-plane (x_k, x_{k+d/2}) of the last axis by its angle.

    Position i of the second-to-last axis rotates plane k by
    i / base^(2k/d); position 0 is the identity, and the rotation preserves
    the norm of every plane. `positions` overrides the default 0..seq-1
    indices (used to test relative-offset behaviour).
    """
    seq, dim = e.shape[-2], e.shape[-1]
    if positions is None:
        positions = np.arange(seq)
    theta = rope_angles(positions, dim, base)
    cos, sin = np.cos(theta), np.sin(theta)
    half = dim // 2
    first = e[..., :half]
    second = e[..., half:]
    return concat([first * cos - second * sin, first * sin + second * cos], axis=-1)


class MultiHeadSelfAttention(Module):
    def __init__(self, dim: int, heads: int, rng: np.random.Generator, rope: bool = False,
                 rope_base: float = 10000.0):
        if dim % heads != 0:
            raise ShapeError("model width must be divisible by the head count")
        self.dim = dim
        self.heads = heads
        self.rope = rope
        self.rope_base = rope_base
        self.q_proj = Linear(dim, dim, rng)
        self.k_proj = Linear(dim, dim, rng)
        self.v_proj = Linear(dim, dim, rng)
        self.o_proj = Linear(dim, dim, rng)

    def _split_heads(self, x: Tensor, batch: int, seq: int) -> Tensor:
        hd = self.dim // self.heads
        return x.reshape(batch, seq, self.heads, hd).transpose((0, 2, 1, 3))

    def forward(
        self,
        x: Tensor,
        mask: np.ndarray | None = None,
        positions: np.ndarray | None = None,
        return_weights: bool = False,
    ):
        """Scaled dot-product attention over [batch, seq, dim].

        `mask` is a boolean [batch, seq] validity array; padded keys are
        excluded from every softmax. When rope is enabled, queries and keys
        are rotated per position before scoring.
        """
        batch, seq, _ = x.shape
        hd = self.dim // self.heads
        q = self._split_heads(self.q_proj(x), batch, seq)
        k = self._split_heads(self.k_proj(x), batch, seq)
        v = self._split_heads(self.v_proj(x), batch, seq)
        if self.rope:
            q = rope_rotate(q, self.rope_base, positions)
            k = rope_rotate(k, self.rope_base, positions)
        scores = (q @ k.transpose((0, 1, 3, 2))) * (1.0 / np.sqrt(hd))
        if mask is not None:
            bias = np.where(np.asarray(mask, dtype=bool), 0.0, MASK_NEG)
            scores = scores + bias[:, None, None, :]
        attn = softmax(scores, axis=-1)
        out = (attn @ v).transpose((0, 2, 1, 3)).reshape(batch, seq, self.dim)
        out = self.o_proj(out)
        if return_weights:
            return out, attn.detach()
        return out


class FeedForward(Module):
    def __init__(self, dim: int, rng: np.random.Generator, hidden_mult: int = 4):
        self.up = Linear(dim, hidden_mult * dim, rng)
        self.down = Linear(hidden_mult * dim, dim, rng)

    def forward(self, x: Tensor) -> Tensor:
        return self.down(gelu(self.up(x)))


class TransformerBlock(Module):
    def __init__(self, dim: int, heads: int, rng: np.random.Generator, rope: bool = False,
                 rope_base: float = 10000.0):
        self.ln1 = LayerNorm(dim)
        self.attn = MultiHeadSelfAttention(dim, heads, rng, rope=rope, rope_base=rope_base)
        self.ln2 = LayerNorm(dim)
        self.ffn = FeedForward(dim, rng)

    def forward(self, x: Tensor, mask: np.ndarray | None = None,
                positions: np.ndarray | None = None) -> Tensor:
        x = x + self.attn(self.ln1(x), mask=mask, positions=positions)
        return x + self.ffn(self.ln2(x))
