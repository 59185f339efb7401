"""Causal temporal convolution network: an encoder stack followed by a decoder stack."""
import numpy as np

from diffcore import ops
from diffcore.module import Conv1d, Module, ModuleList
from diffcore.tensor import DiffArray
from exceptions import ShapeMismatchError


class TemporalConvNet(Module):
    """
    ``stacks`` x ``units_per_stack`` causal Conv1d units of width ``channels``
    (kernel 2, stride 1, left padding 1), leaky ReLU between consecutive units.

    Sequence length and width are preserved; position t depends on inputs <= t.
    ``output_bias=False`` drops the bias of the last unit, for stacks whose
    output is batch normalized.
    """

    def __init__(self, channels: int, rng: np.random.Generator, kernel_size: int = 2,
                 units_per_stack: int = 2, stacks: int = 2, slope: float = 0.01,
                 output_bias: bool = True):
        super().__init__()
        self.channels = channels
        self.slope = slope
        count = units_per_stack * stacks
        self.units = ModuleList(
            Conv1d(channels, channels, kernel_size, rng, bias=output_bias or i < count - 1) for i in range(count)
        )

    def forward(self, x: DiffArray) -> DiffArray:
        if x.ndim != 3 or x.shape[-1] != self.channels:
            raise ShapeMismatchError('tcn', [x.shape, (self.channels,)])
        for i, unit in enumerate(self.units):
            if i:
                x = ops.leaky_relu(x, self.slope)
            x = unit(x)
        return x
