"""Central finite-difference gradient checking."""
from typing import Callable, Dict, Optional, Sequence

import numpy as np

from diffcore.module import Parameter
from diffcore.tensor import DiffArray, backward


def numeric_gradient(fn: Callable[[], DiffArray], param: Parameter, index: tuple, eps: float) -> float:
    original = param.values[index]
    param.values[index] = original + eps
    upper = fn().item()
    param.values[index] = original - eps
    lower = fn().item()
    param.values[index] = original
    return (upper - lower) / (2.0 * eps)


def gradient_check(fn: Callable[[], DiffArray], params: Sequence[Parameter], eps: float = 1e-5,
                   max_entries: Optional[int] = None, seed: int = 0,
                   min_scale: float = 1e-12) -> Dict[str, float]:
    """
    Compare backward() gradients with central differences.

    ``fn`` must rebuild the graph and return a scalar loss each call. For large
    parameters, ``max_entries`` random entries per parameter are checked.
    ``min_scale`` floors the denominator so near-zero gradients compare by
    absolute error.

    Returns:
        Mapping of parameter name -> relative error
        ||analytic - numeric|| / max(||analytic|| + ||numeric||, min_scale)
    """
    rng = np.random.default_rng(seed)
    for p in params:
        p.grad = None
    backward(fn())

    errors = {}
    for i, p in enumerate(params):
        analytic_full = p.grad if p.grad is not None else np.zeros_like(p.values)
        flat_indices = np.arange(p.size)
        if max_entries is not None and p.size > max_entries:
            flat_indices = rng.choice(p.size, size=max_entries, replace=False)
        analytic, numeric = [], []
        for flat in flat_indices:
            index = np.unravel_index(int(flat), p.shape) if p.shape else ()
            analytic.append(analytic_full[index])
            numeric.append(numeric_gradient(fn, p, index, eps))
        analytic, numeric = np.array(analytic), np.array(numeric)
        scale = max(np.linalg.norm(analytic) + np.linalg.norm(numeric), min_scale)
        errors[f"{p.name}#{i}"] = float(np.linalg.norm(analytic - numeric) / scale)
    for p in params:
        p.grad = None
    return errors


def max_relative_error(fn: Callable[[], DiffArray], params: Sequence[Parameter], **kwargs) -> float:
    errors = gradient_check(fn, params, **kwargs)
    return max(errors.values()) if errors else 0.0
