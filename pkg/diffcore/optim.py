"""Adam optimizer with decoupled L2 weight decay."""
from typing import Dict, Iterable, Mapping, Tuple, Union

import numpy as np

from diffcore.module import Parameter
from exceptions import ConfigurationError, MissingGradientError


class Adam:
    """
    Adam update with decoupled weight decay (applied to trainable parameters only).

    Moment buffers are keyed by parameter identity, so one optimizer serves a
    single model instance. ``step`` clears gradients after updating.
    """

    def __init__(self, learning_rate: float = 1e-4, weight_decay: float = 1e-4,
                 betas: Tuple[float, float] = (0.9, 0.999), eps: float = 1e-8):
        if learning_rate <= 0:
            raise ConfigurationError('learning_rate', f"learning_rate must be > 0, got {learning_rate}")
        if weight_decay < 0:
            raise ConfigurationError('weight_decay', f"weight_decay must be >= 0, got {weight_decay}")
        self.learning_rate = learning_rate
        self.weight_decay = weight_decay
        self.betas = betas
        self.eps = eps
        self.step_count = 0
        self._first_moment: Dict[int, np.ndarray] = {}
        self._second_moment: Dict[int, np.ndarray] = {}

    def step(self, params: Union[Mapping[str, Parameter], Iterable[Parameter]]) -> None:
        """
        Update every trainable parameter. A mapping from ``Module.named_parameters()``
        lets ``MissingGradientError`` report full paths such as ``sequence_encoder/head/weight``.
        """
        if isinstance(params, Mapping):
            named = [(name, p) for name, p in params.items() if p.trainable]
        else:
            named = [(p.name or f"#{i}", p) for i, p in enumerate(params) if p.trainable]
        missing = [name for name, p in named if p.grad is None]
        if missing:
            raise MissingGradientError(missing)

        params = [p for _, p in named]
        self.step_count += 1
        beta1, beta2 = self.betas
        bias1 = 1.0 - beta1 ** self.step_count
        bias2 = 1.0 - beta2 ** self.step_count

        for p in params:
            key = id(p)
            m = self._first_moment.setdefault(key, np.zeros_like(p.values))
            v = self._second_moment.setdefault(key, np.zeros_like(p.values))
            m *= beta1
            m += (1.0 - beta1) * p.grad
            v *= beta2
            v += (1.0 - beta2) * p.grad * p.grad
            update = (m / bias1) / (np.sqrt(v / bias2) + self.eps)
            if self.weight_decay:
                p.values -= self.learning_rate * self.weight_decay * p.values
            p.values -= self.learning_rate * update
            p.grad = None

    @staticmethod
    def zero_grad(params: Iterable[Parameter]) -> None:
        for p in params:
            p.grad = None

    def describe(self) -> dict:
        return {
            'name': 'adam',
            'learning_rate': self.learning_rate,
            'weight_decay': self.weight_decay,
            'betas': list(self.betas),
            'eps': self.eps,
        }
