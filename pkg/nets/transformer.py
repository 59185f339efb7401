"""Pre-layer-norm transformer encoder (no dropout)."""
import numpy as np

from diffcore import ops
from diffcore.module import LayerNorm, Linear, Module, ModuleList
from diffcore.tensor import DiffArray
from exceptions import ConfigurationError, ShapeMismatchError


class MultiHeadAttention(Module):
    def __init__(self, dim: int, num_heads: int, rng: np.random.Generator):
        super().__init__()
        if dim % num_heads:
            raise ConfigurationError('num_heads', f"Width {dim} is not divisible by {num_heads} heads")
        self.dim = dim
        self.num_heads = num_heads
        self.head_dim = dim // num_heads
        self.query = Linear(dim, dim, rng)
        self.key = Linear(dim, dim, rng, bias=False)
        self.value = Linear(dim, dim, rng)
        self.output = Linear(dim, dim, rng)

    def _split_heads(self, x: DiffArray, batch: int, length: int) -> DiffArray:
        # (B, T, D) -> (B, H, T, D/H)
        return ops.transpose(ops.reshape(x, (batch, length, self.num_heads, self.head_dim)), (0, 2, 1, 3))

    def forward(self, x: DiffArray) -> DiffArray:
        if x.ndim != 3 or x.shape[-1] != self.dim:
            raise ShapeMismatchError('attention', [x.shape, (self.dim,)])
        batch, length, _ = x.shape
        q = self._split_heads(self.query(x), batch, length)
        k = self._split_heads(self.key(x), batch, length)
        v = self._split_heads(self.value(x), batch, length)
        scores = ops.matmul(q, ops.transpose(k, (0, 1, 3, 2))) / np.sqrt(self.head_dim)
        attended = ops.matmul(ops.softmax(scores, axis=-1), v)
        merged = ops.reshape(ops.transpose(attended, (0, 2, 1, 3)), (batch, length, self.dim))
        return self.output(merged)


class EncoderLayer(Module):
    """x + MHA(LN(x)), then x + FF(LN(x)) with a ReLU feed-forward of width ``ff_dim``."""

    def __init__(self, dim: int, num_heads: int, ff_dim: int, rng: np.random.Generator):
        super().__init__()
        self.attention_norm = LayerNorm(dim)
        self.attention = MultiHeadAttention(dim, num_heads, rng)
        self.ff_norm = LayerNorm(dim)
        self.ff_in = Linear(dim, ff_dim, rng)
        self.ff_out = Linear(ff_dim, dim, rng)

    def forward(self, x: DiffArray) -> DiffArray:
        x = x + self.attention(self.attention_norm(x))
        return x + self.ff_out(ops.relu(self.ff_in(self.ff_norm(x))))


class TransformerEncoder(Module):
    """Stack of ``num_layers`` encoder layers over (B, T, dim)."""

    def __init__(self, dim: int, num_heads: int, num_layers: int, ff_dim: int, rng: np.random.Generator):
        super().__init__()
        self.dim = dim
        self.layers = ModuleList(EncoderLayer(dim, num_heads, ff_dim, rng) for _ in range(num_layers))

    def forward(self, x: DiffArray) -> DiffArray:
        for layer in self.layers:
            x = layer(x)
        return x
