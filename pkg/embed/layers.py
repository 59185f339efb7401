"""Scalar-time and categorical embedding layers."""
from typing import Optional, Sequence, Union

import numpy as np

from diffcore import ops
from diffcore.module import Module, Parameter
from diffcore.tensor import DiffArray, as_diff
from exceptions import ConfigurationError, ShapeMismatchError

TimeInput = Union[DiffArray, np.ndarray, float]


def _expand(tau: TimeInput) -> DiffArray:
    tau = as_diff(tau)
    return ops.reshape(tau, tau.shape + (1,))


def _inverse_softplus(values: np.ndarray) -> np.ndarray:
    values = np.asarray(values, dtype=np.float64)
    return values + np.log(-np.expm1(-values))


class Time2VecLayer(Module):
    """
    t2v(τ)[0] = ω₀τ + ψ₀ and t2v(τ)[i] = sin(ω_i τ + ψ_i) for i >= 1.

    Accepts τ of any shape and appends an axis of size k. With
    ``shift_linear=False`` the linear element has no ψ₀ and ``psi`` holds the
    k - 1 periodic phases only.
    """

    def __init__(self, k: int, rng: np.random.Generator, shift_linear: bool = True):
        super().__init__()
        if k < 2:
            raise ConfigurationError('k', f"Time2Vec needs a linear and at least one periodic element, got k={k}")
        self.k = k
        self.shift_linear = shift_linear
        self.omega = Parameter(rng.uniform(-1.0, 1.0, size=k))
        psi = rng.uniform(-1.0, 1.0, size=k)
        self.psi = Parameter(psi if shift_linear else psi[1:])

    def set_values(self, omega: Sequence[float], psi: Sequence[float]) -> None:
        omega, psi = np.asarray(omega, dtype=np.float64), np.asarray(psi, dtype=np.float64)
        if omega.shape != (self.k,) or psi.shape != self.psi.shape:
            raise ShapeMismatchError('time2vec', [(self.k,), omega.shape, psi.shape])
        self.omega.values[...] = omega
        self.psi.values[...] = psi

    def forward(self, tau: TimeInput) -> DiffArray:
        k = self.k
        if not self.shift_linear:
            scaled = _expand(tau) * self.omega
            return ops.concat([scaled[..., :1], ops.sin(scaled[..., 1:k] + self.psi)], axis=-1)
        linear = _expand(tau) * self.omega + self.psi
        return ops.concat([linear[..., :1], ops.sin(linear[..., 1:k])], axis=-1)


class RbfLayer(Module):
    """
    rbf(τ)[i] = exp(-|τ - μ_i| / σ_i) with σ = softplus(raw) > 0.

    μ starts evenly spaced over [0, 1); σ starts at 1/k.
    """

    def __init__(self, k: int, rng: Optional[np.random.Generator] = None):
        super().__init__()
        if k < 1:
            raise ConfigurationError('k', f"RBF embedding size must be positive, got k={k}")
        self.k = k
        self.mu = Parameter(np.arange(k, dtype=np.float64) / k)
        self.raw_sigma = Parameter(_inverse_softplus(np.full(k, 1.0 / k)))

    @property
    def sigma(self) -> np.ndarray:
        return np.logaddexp(0.0, self.raw_sigma.values)

    def set_centers(self, mu: Sequence[float]) -> None:
        self.mu.values[...] = np.asarray(mu, dtype=np.float64)

    def set_widths(self, sigma: Sequence[float]) -> None:
        sigma = np.asarray(sigma, dtype=np.float64)
        if np.any(sigma <= 0):
            raise ConfigurationError('sigma', "RBF widths must be positive")
        self.raw_sigma.values[...] = _inverse_softplus(sigma)

    def forward(self, tau: TimeInput) -> DiffArray:
        distance = ops.neg_abs(_expand(tau) - self.mu)
        return ops.exp(distance / ops.softplus(self.raw_sigma))


class LookupEmbedding(Module):
    """Trainable table of ``vocab_size`` rows of width ``dim``."""

    def __init__(self, vocab_size: int, dim: int, rng: np.random.Generator, field: str = 'embedding'):
        super().__init__()
        self.vocab_size = vocab_size
        self.dim = dim
        self.field = field
        self.table = Parameter(rng.normal(0.0, 1.0 / np.sqrt(dim), size=(vocab_size, dim)))

    def forward(self, index: np.ndarray) -> DiffArray:
        return ops.embedding_lookup(self.table, index, field=self.field)


class DiffScale(Module):
    """Single trainable factor applied to raw time differences (seconds)."""

    def __init__(self, initial: float = 1.0 / 3600.0):
        super().__init__()
        self.scale = Parameter(np.array(initial, dtype=np.float64))

    def forward(self, diffs: TimeInput) -> DiffArray:
        return as_diff(diffs) * self.scale
