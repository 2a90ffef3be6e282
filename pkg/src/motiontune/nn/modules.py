"""Transformer building blocks on top of the autodiff tensor.

Pre-norm residual blocks with multi-head self-attention, learned absolute
position embeddings, and a GELU feed-forward. Causal masking zeroes attention
weights strictly above the diagonal, so outputs at position t depend only on
positions <= t, bitwise.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .tensor import Tensor, embedding, softmax


class Parameter(Tensor):
    def __init__(self, data):
        super().__init__(np.asarray(data), requires_grad=True)


class Module:
    """Container tracking parameters and submodules in insertion order."""

    def __init__(self):
        self.training = True

    def named_parameters(self, prefix: str = "") -> list[tuple[str, Parameter]]:
        out: list[tuple[str, Parameter]] = []
        for name, value in vars(self).items():
            if isinstance(value, Parameter):
                out.append((prefix + name, value))
            elif isinstance(value, Module):
                out.extend(value.named_parameters(f"{prefix}{name}/"))
            elif isinstance(value, (list, tuple)):
                for i, item in enumerate(value):
                    if isinstance(item, Parameter):
                        out.append((f"{prefix}{name}/{i}", item))
                    elif isinstance(item, Module):
                        out.extend(item.named_parameters(f"{prefix}{name}/{i}/"))
        return out

    def parameters(self) -> list[Parameter]:
        return [p for _, p in self.named_parameters()]

    def zero_grad(self):
        for p in self.parameters():
            p.zero_grad()

    def train(self, mode: bool = True):
        for value in vars(self).values():
            if isinstance(value, Module):
                value.train(mode)
            elif isinstance(value, (list, tuple)):
                for item in value:
                    if isinstance(item, Module):
                        item.train(mode)
        self.training = mode
        return self

    def eval(self):
        return self.train(False)

    def state_dict(self) -> dict[str, np.ndarray]:
        return {name: p.data.copy() for name, p in self.named_parameters()}

    def load_state_dict(self, state: dict[str, np.ndarray]):
        for name, p in self.named_parameters():
            if name not in state:
                raise KeyError(f"missing parameter {name!r} in state dict")
            arr = np.asarray(state[name])
            if arr.shape != p.data.shape:
                raise ValueError(
                    f"parameter {name!r}: stored shape {arr.shape} != expected {p.data.shape}"
                )
            p.data = arr.astype(p.data.dtype, copy=True)


@dataclass
class TransformerConfig:
    """Shape of a transformer stack; ``hidden_dim`` is the feed-forward width."""

    layers: int = 2
    heads: int = 4
    model_dim: int = 64
    hidden_dim: int = 128
    causal: bool = False
    max_seq_len: int = 512
    dropout: float = 0.1

    def __post_init__(self):
        if min(self.layers, self.heads, self.model_dim, self.hidden_dim, self.max_seq_len) < 1:
            raise ValueError("transformer dimensions must be positive")
        if self.model_dim % self.heads != 0:
            raise ValueError(
                f"model_dim {self.model_dim} must be divisible by heads {self.heads}"
            )
        if not 0.0 <= self.dropout < 1.0:
            raise ValueError(f"dropout must be in [0, 1), got {self.dropout}")


def init_normal(rng: np.random.Generator, shape, dtype, std: float = 0.02) -> np.ndarray:
    return (rng.standard_normal(shape) * std).astype(dtype)


def gelu(x: Tensor) -> Tensor:
    # tanh approximation: 0.5 x (1 + tanh(sqrt(2/pi) (x + 0.044715 x^3)))
    inner = (x + (x**3.0) * 0.044715) * 0.7978845608028654
    return x * 0.5 * (inner.tanh() + 1.0)


class Linear(Module):
    def __init__(self, in_dim: int, out_dim: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.weight = Parameter(init_normal(rng, (in_dim, out_dim), dtype))
        self.bias = Parameter(np.zeros(out_dim, dtype=dtype))

    def __call__(self, x: Tensor) -> Tensor:
        return x @ self.weight + self.bias


class LayerNorm(Module):
    def __init__(self, dim: int, dtype=np.float32, eps: float = 1e-5):
        super().__init__()
        self.gamma = Parameter(np.ones(dim, dtype=dtype))
        self.beta = Parameter(np.zeros(dim, dtype=dtype))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        mu = x.mean(axis=-1, keepdims=True)
        centered = x - mu
        var = (centered * centered).mean(axis=-1, keepdims=True)
        return centered / (var + self.eps).sqrt() * self.gamma + self.beta


class Embedding(Module):
    def __init__(self, num_rows: int, dim: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.table = Parameter(init_normal(rng, (num_rows, dim), dtype))

    def __call__(self, indices: np.ndarray) -> Tensor:
        return embedding(self.table, indices)


class Dropout(Module):
    """Inverted dropout; draws masks from a shared generator while training."""

    def __init__(self, p: float, rng: np.random.Generator):
        super().__init__()
        self.p = p
        self.rng = rng

    def __call__(self, x: Tensor) -> Tensor:
        if not self.training or self.p <= 0.0:
            return x
        keep = (self.rng.random(x.shape) >= self.p).astype(x.dtype)
        return x * Tensor(keep / (1.0 - self.p))


def causal_mask(t_len: int) -> np.ndarray:
    """Boolean (T, T) mask; True where position t may attend to position j."""
    return np.tril(np.ones((t_len, t_len), dtype=bool))


class MultiHeadSelfAttention(Module):
    def __init__(self, model_dim: int, heads: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        if model_dim % heads != 0:
            raise ValueError(f"model_dim {model_dim} not divisible by heads {heads}")
        self.heads = heads
        self.head_dim = model_dim // heads
        self.wq = Linear(model_dim, model_dim, rng, dtype)
        self.wk = Linear(model_dim, model_dim, rng, dtype)
        self.wv = Linear(model_dim, model_dim, rng, dtype)
        self.wo = Linear(model_dim, model_dim, rng, dtype)

    def __call__(self, x: Tensor, mask: np.ndarray | None = None, return_weights: bool = False):
        b, t, d = x.shape
        h, hd = self.heads, self.head_dim

        def split(y: Tensor) -> Tensor:
            return y.reshape(b, t, h, hd).transpose(0, 2, 1, 3)  # (B, H, T, hd)

        q, k, v = split(self.wq(x)), split(self.wk(x)), split(self.wv(x))
        scores = (q @ k.swapaxes(-1, -2)) * (1.0 / np.sqrt(hd))
        if mask is not None:
            bias = np.where(mask, 0.0, -np.inf).astype(x.dtype)
            scores = scores + Tensor(bias)
        weights = softmax(scores, axis=-1)  # masked entries are exactly zero
        out = (weights @ v).transpose(0, 2, 1, 3).reshape(b, t, d)
        out = self.wo(out)
        if return_weights:
            return out, weights
        return out


class TransformerBlock(Module):
    """Pre-norm residual block: x + attn(ln(x)), then x + ffn(ln(x))."""

    def __init__(self, config: TransformerConfig, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        d = config.model_dim
        self.ln1 = LayerNorm(d, dtype)
        self.attn = MultiHeadSelfAttention(d, config.heads, rng, dtype)
        self.ln2 = LayerNorm(d, dtype)
        self.ffn_in = Linear(d, config.hidden_dim, rng, dtype)
        self.ffn_out = Linear(config.hidden_dim, d, rng, dtype)
        self.drop = Dropout(config.dropout, rng)

    def __call__(self, x: Tensor, mask: np.ndarray | None = None) -> Tensor:
        x = x + self.drop(self.attn(self.ln1(x), mask))
        return x + self.drop(self.ffn_out(gelu(self.ffn_in(self.ln2(x)))))


class TransformerStack(Module):
    """N transformer blocks with a final layer norm.

    When ``config.causal`` is set and no mask is passed, a lower-triangular
    mask is applied so each position sees only its prefix.
    """

    def __init__(self, config: TransformerConfig, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.config = config
        self.blocks = [TransformerBlock(config, rng, dtype) for _ in range(config.layers)]
        self.ln_final = LayerNorm(config.model_dim, dtype)

    def __call__(self, x: Tensor, mask: np.ndarray | None = None) -> Tensor:
        if mask is None and self.config.causal:
            mask = causal_mask(x.shape[1])
        for block in self.blocks:
            x = block(x, mask)
        return self.ln_final(x)


class PositionEmbedding(Module):
    def __init__(self, max_seq_len: int, dim: int, rng: np.random.Generator, dtype=np.float32):
        super().__init__()
        self.max_seq_len = max_seq_len
        self.table = Parameter(init_normal(rng, (max_seq_len, dim), dtype))

    def __call__(self, t_len: int) -> Tensor:
        if t_len > self.max_seq_len:
            raise ValueError(f"sequence length {t_len} exceeds max_seq_len {self.max_seq_len}")
        return self.table[np.arange(t_len)]
