"""Parameter containers and the Module base class used by every trainable layer."""
import copy
from typing import Dict, Iterator, List, Optional, Tuple

import numpy as np

from diffcore import ops
from diffcore.tensor import DiffArray
from exceptions import CheckpointIntegrityError, ShapeMismatchError


class Parameter(DiffArray):
    """A leaf DiffArray owned by a Module.

    ``name`` is the attribute name at registration; the full, model-unique name
    is the '/'-joined attribute path reported by ``Module.named_parameters``.
    """

    def __init__(self, values, name: str = '', trainable: bool = True):
        super().__init__(values, requires_grad=trainable, op='parameter')
        self.name = name
        self.trainable = trainable

    @property
    def array(self) -> np.ndarray:
        return self.values

    def __repr__(self) -> str:
        return f"Parameter(name='{self.name}', shape={self.shape}, trainable={self.trainable})"


class Module:
    """Base class: registers Parameters, child Modules and non-trainable buffers."""

    def __init__(self):
        object.__setattr__(self, '_parameters', {})
        object.__setattr__(self, '_modules', {})
        object.__setattr__(self, '_buffers', {})
        object.__setattr__(self, 'training', True)

    def __setattr__(self, name, value):
        if isinstance(value, Parameter):
            if not value.name:
                value.name = name
            self._parameters[name] = value
        elif isinstance(value, Module):
            self._modules[name] = value
        object.__setattr__(self, name, value)

    def register_buffer(self, name: str, value: np.ndarray) -> None:
        """Non-trainable state (e.g. running statistics) saved with checkpoints."""
        self._buffers[name] = np.asarray(value, dtype=np.float64)
        object.__setattr__(self, name, self._buffers[name])

    def forward(self, *args, **kwargs):
        raise NotImplementedError

    def __call__(self, *args, **kwargs):
        return self.forward(*args, **kwargs)

    # -- traversal ----------------------------------------------------------------
    def named_modules(self, prefix: str = '') -> Iterator[Tuple[str, 'Module']]:
        yield prefix, self
        for name, child in self._modules.items():
            yield from child.named_modules(f"{prefix}/{name}" if prefix else name)

    def named_parameters(self, prefix: str = '') -> Iterator[Tuple[str, Parameter]]:
        seen = set()
        for module_name, module in self.named_modules(prefix):
            for name, param in module._parameters.items():
                if id(param) in seen:
                    continue
                seen.add(id(param))
                yield (f"{module_name}/{name}" if module_name else name), param

    def named_buffers(self, prefix: str = '') -> Iterator[Tuple[str, np.ndarray]]:
        for module_name, module in self.named_modules(prefix):
            for name, buf in module._buffers.items():
                yield (f"{module_name}/{name}" if module_name else name), buf

    def parameters(self, trainable_only: bool = False) -> List[Parameter]:
        return [p for _, p in self.named_parameters() if p.trainable or not trainable_only]

    def num_parameters(self) -> int:
        return sum(p.size for p in self.parameters())

    # -- modes ----------------------------------------------------------------------
    def train(self, mode: bool = True) -> 'Module':
        for _, module in self.named_modules():
            object.__setattr__(module, 'training', mode)
        return self

    def eval(self) -> 'Module':
        return self.train(False)

    def zero_grad(self) -> None:
        for p in self.parameters():
            p.grad = None

    def clone(self) -> 'Module':
        """Independent deep copy, e.g. for evaluation on another worker."""
        return copy.deepcopy(self)

    # -- state ----------------------------------------------------------------------
    def state_dict(self) -> Dict[str, np.ndarray]:
        state = {name: p.values.copy() for name, p in self.named_parameters()}
        for name, buf in self.named_buffers():
            state[f"{name}@buffer"] = buf.copy()
        return state

    def load_state_dict(self, state: Dict[str, np.ndarray]) -> None:
        own = dict(self.named_parameters())
        buffers = dict(self.named_buffers())
        expected = set(own) | {f"{name}@buffer" for name in buffers}
        missing = sorted(expected - set(state))
        unexpected = sorted(set(state) - expected)
        if missing or unexpected:
            raise CheckpointIntegrityError(
                '<state>',
                f"State does not match model: missing={missing[:5]} unexpected={unexpected[:5]}",
            )
        for name, param in own.items():
            values = np.asarray(state[name], dtype=np.float64)
            if values.shape != param.shape:
                raise ShapeMismatchError(f"load:{name}", [param.shape, values.shape])
            param.values[...] = values
            param.grad = None
        for name, buf in buffers.items():
            values = np.asarray(state[f"{name}@buffer"], dtype=np.float64)
            if values.shape != buf.shape:
                raise ShapeMismatchError(f"load:{name}", [buf.shape, values.shape])
            buf[...] = values


class ModuleList(Module):
    """Ordered container registering children under '0', '1', ..."""

    def __init__(self, modules=()):
        super().__init__()
        object.__setattr__(self, '_items', [])
        for module in modules:
            self.append(module)

    def append(self, module: Module) -> None:
        self._modules[str(len(self._items))] = module
        self._items.append(module)

    def __iter__(self):
        return iter(self._items)

    def __len__(self) -> int:
        return len(self._items)

    def __getitem__(self, i: int) -> Module:
        return self._items[i]


class Identity(Module):
    """Pass-through used where an ablation removes a component."""

    def forward(self, x, *args, **kwargs):
        return x


class Linear(Module):
    """y = x W + b with W: (in, out), initialized uniform in ±1/sqrt(in)."""

    def __init__(self, in_features: int, out_features: int, rng: np.random.Generator, bias: bool = True):
        super().__init__()
        bound = 1.0 / np.sqrt(in_features)
        self.in_features = in_features
        self.out_features = out_features
        self.weight = Parameter(rng.uniform(-bound, bound, size=(in_features, out_features)))
        self.bias = Parameter(rng.uniform(-bound, bound, size=(out_features,))) if bias else None

    def forward(self, x: DiffArray) -> DiffArray:
        if x.shape[-1] != self.in_features:
            raise ShapeMismatchError('linear', [x.shape, self.weight.shape])
        out = ops.matmul(x, self.weight) if x.ndim >= 2 else ops.reshape(
            ops.matmul(ops.reshape(x, (1, -1)), self.weight), (-1,))
        if self.bias is not None:
            out = out + self.bias
        return out


class Conv1d(Module):
    """Causal 1-D convolution (left padding K-1, stride 1) over (B, T, C)."""

    def __init__(self, in_channels: int, out_channels: int, kernel_size: int,
                 rng: np.random.Generator, stride: int = 1, left_padding: Optional[int] = None,
                 bias: bool = True):
        super().__init__()
        bound = 1.0 / np.sqrt(in_channels * kernel_size)
        self.stride = stride
        self.left_padding = kernel_size - 1 if left_padding is None else left_padding
        self.weight = Parameter(rng.uniform(-bound, bound, size=(kernel_size, in_channels, out_channels)))
        self.bias = Parameter(rng.uniform(-bound, bound, size=(out_channels,))) if bias else None

    def forward(self, x: DiffArray) -> DiffArray:
        return ops.conv1d(x, self.weight, self.bias, stride=self.stride, left_padding=self.left_padding)


class BatchNorm(Module):
    """Per-channel batch normalization over (batch, time) with running statistics."""

    def __init__(self, channels: int, momentum: float = 0.1, eps: float = 1e-5):
        super().__init__()
        self.momentum = momentum
        self.eps = eps
        self.gamma = Parameter(np.ones(channels))
        self.beta = Parameter(np.zeros(channels))
        self.register_buffer('running_mean', np.zeros(channels))
        self.register_buffer('running_var', np.ones(channels))

    def forward(self, x: DiffArray) -> DiffArray:
        return ops.batch_norm(x, self.gamma, self.beta, self.running_mean, self.running_var,
                              training=self.training, momentum=self.momentum, eps=self.eps)


class LayerNorm(Module):
    def __init__(self, features: int, eps: float = 1e-5):
        super().__init__()
        self.eps = eps
        self.gamma = Parameter(np.ones(features))
        self.beta = Parameter(np.zeros(features))

    def forward(self, x: DiffArray) -> DiffArray:
        return ops.layer_norm(x, self.gamma, self.beta, eps=self.eps)
