"""Minimal reverse-mode differentiable arrays, layers and optimizer."""
from diffcore.tensor import DiffArray, as_diff, backward, grad_enabled
from diffcore.module import (
    BatchNorm, Conv1d, Identity, LayerNorm, Linear, Module, ModuleList, Parameter,
)
from diffcore.optim import Adam
from diffcore.gradcheck import gradient_check, max_relative_error

__all__ = [
    'DiffArray', 'as_diff', 'backward', 'grad_enabled',
    'Module', 'ModuleList', 'Parameter', 'Identity', 'Linear', 'Conv1d', 'BatchNorm', 'LayerNorm',
    'Adam', 'gradient_check', 'max_relative_error',
]
