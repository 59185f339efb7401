"""Action, time and sequence encoders."""
from typing import Optional, Sequence

import numpy as np

from diffcore import ops
from diffcore.module import BatchNorm, Linear, Module, Parameter
from diffcore.tensor import DiffArray
from exceptions import ShapeMismatchError
from nets.tcn import TemporalConvNet
from nets.transformer import TransformerEncoder


class ActionEncoder(Module):
    """
    Fuse four d-wide parts of every action into one d-wide vector.

    The parts are stacked as a 4-token set, passed through a transformer,
    flattened in order to 4d and projected by W (4d x d, no bias).
    """

    def __init__(self, dim: int, num_heads: int, num_layers: int, ff_dim: int, rng: np.random.Generator,
                 transformer: Optional[Module] = None):
        super().__init__()
        self.dim = dim
        self.transformer = transformer if transformer is not None else TransformerEncoder(
            dim, num_heads, num_layers, ff_dim, rng)
        self.projection = Linear(4 * dim, dim, rng, bias=False)

    def forward(self, parts: Sequence[DiffArray]) -> DiffArray:
        if len(parts) != 4 or any(p.shape[-1] != self.dim or p.shape != parts[0].shape for p in parts):
            raise ShapeMismatchError('action_encoder', [p.shape for p in parts] + [(self.dim,)])
        batch, length = parts[0].shape[:2]
        tokens = ops.stack(parts, axis=2)                                # (B, T, 4, d)
        encoded = self.transformer(ops.reshape(tokens, (batch * length, 4, self.dim)))
        flat = ops.reshape(encoded, (batch, length, 4 * self.dim))       # Z'
        return self.projection(flat)                                     # H


class TimeEncoder(Module):
    """TCN over the time-difference embeddings, concatenated with the time-of-day parts, then batch norm."""

    def __init__(self, dim: int, rng: np.random.Generator, tcn: Optional[Module] = None, slope: float = 0.01):
        super().__init__()
        self.dim = dim
        self.tcn = tcn if tcn is not None else TemporalConvNet(dim, rng, slope=slope, output_bias=False)
        self.norm = BatchNorm(3 * dim)

    def forward(self, diff_parts: DiffArray, time_periodic: DiffArray, time_radial: DiffArray) -> DiffArray:
        shapes = [diff_parts.shape, time_periodic.shape, time_radial.shape]
        if len(set(shapes)) != 1 or diff_parts.shape[-1] != self.dim:
            raise ShapeMismatchError('time_encoder', shapes)
        encoded = self.tcn(diff_parts)
        return self.norm(ops.concat([time_periodic, time_radial, encoded], axis=-1))


class SequenceEncoder(Module):
    """
    Transformer over the fused sequence, positional matrix P, TCN, average
    pooling over positions and a two-layer head.

    P is added after the transformer unless ``positional_before`` is set.
    """

    def __init__(self, width: int, context_length: int, hidden_dim: int, output_dim: int,
                 num_heads: int, num_layers: int, ff_dim: int, rng: np.random.Generator,
                 positional_before: bool = False, slope: float = 0.01, transformer: Optional[Module] = None):
        super().__init__()
        self.width = width
        self.context_length = context_length
        self.positional_before = positional_before
        self.slope = slope
        self.transformer = transformer if transformer is not None else TransformerEncoder(
            width, num_heads, num_layers, ff_dim, rng)
        self.positional = Parameter(rng.normal(0.0, 0.02, size=(context_length, width)))
        self.tcn = TemporalConvNet(width, rng, slope=slope)
        self.hidden = Linear(width, hidden_dim, rng)
        self.head = Linear(hidden_dim, output_dim, rng)

    def features(self, sequence: DiffArray) -> DiffArray:
        """(B, T, width) -> pooled (B, width)."""
        if sequence.ndim != 3 or sequence.shape[1:] != (self.context_length, self.width):
            raise ShapeMismatchError('sequence_encoder', [sequence.shape, (self.context_length, self.width)])
        if self.positional_before:
            sequence = sequence + self.positional
        encoded = self.transformer(sequence)                             # F
        if not self.positional_before:
            encoded = encoded + self.positional                          # F'
        encoded = self.tcn(encoded)
        pooled = ops.avg_pool1d(encoded, kernel=self.context_length)     # (B, 1, width)
        return ops.reshape(pooled, (sequence.shape[0], self.width))

    def forward(self, sequence: DiffArray) -> DiffArray:
        return self.head(ops.leaky_relu(self.hidden(self.features(sequence)), self.slope))
