"""LSTM layers for the recurrent baselines."""
import numpy as np

from diffcore import ops
from diffcore.module import Linear, Module, ModuleList
from diffcore.tensor import DiffArray
from exceptions import ShapeMismatchError


class LSTMCell(Module):
    def __init__(self, input_dim: int, hidden_dim: int, rng: np.random.Generator):
        super().__init__()
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.gates = Linear(input_dim + hidden_dim, 4 * hidden_dim, rng)

    def forward(self, x: DiffArray, h: DiffArray, c: DiffArray):
        z = self.gates(ops.concat([x, h], axis=-1))
        n = self.hidden_dim
        i = ops.sigmoid(z[:, 0:n])
        f = ops.sigmoid(z[:, n:2 * n])
        g = ops.tanh(z[:, 2 * n:3 * n])
        o = ops.sigmoid(z[:, 3 * n:4 * n])
        c = f * c + i * g
        return o * ops.tanh(c), c


class LSTM(Module):
    """Stacked LSTM over (B, T, input_dim) returning all hidden states (B, T, hidden_dim)."""

    def __init__(self, input_dim: int, hidden_dim: int, num_layers: int, rng: np.random.Generator):
        super().__init__()
        self.input_dim = input_dim
        self.hidden_dim = hidden_dim
        self.cells = ModuleList(
            LSTMCell(input_dim if layer == 0 else hidden_dim, hidden_dim, rng) for layer in range(num_layers)
        )

    def forward(self, x: DiffArray) -> DiffArray:
        if x.ndim != 3 or x.shape[-1] != self.input_dim:
            raise ShapeMismatchError('lstm', [x.shape, (self.input_dim,)])
        batch, length, _ = x.shape
        for cell in self.cells:
            h = DiffArray(np.zeros((batch, self.hidden_dim)))
            c = DiffArray(np.zeros((batch, self.hidden_dim)))
            outputs = []
            for t in range(length):
                h, c = cell(x[:, t, :], h, c)
                outputs.append(h)
            x = ops.stack(outputs, axis=1)
        return x
