"""Training objectives."""
import numpy as np

from diffcore import ops
from diffcore.tensor import DiffArray, as_diff
from exceptions import BinningError, ShapeMismatchError


def cross_entropy_loss(logits: DiffArray, labels: np.ndarray) -> DiffArray:
    """Mean negative log softmax-probability of the true class; logits (B, k), labels (B,) in [0, k)."""
    logits = as_diff(logits)
    labels = np.asarray(labels)
    if logits.ndim != 2 or labels.shape != (logits.shape[0],):
        raise ShapeMismatchError('cross_entropy', [logits.shape, labels.shape])
    k = logits.shape[1]
    if labels.size and (labels.min() < 0 or labels.max() >= k or not np.issubdtype(labels.dtype, np.integer)):
        raise BinningError('cross_entropy', f"Labels must be integers in [0, {k}), got {labels.min()}..{labels.max()}")
    picked = ops.log_softmax(logits, axis=1)[np.arange(labels.shape[0]), labels]
    return -ops.mean(picked)


def mse_loss(predictions: DiffArray, targets: np.ndarray) -> DiffArray:
    """Mean squared error; the regression head trains on time of day / 86400."""
    predictions = as_diff(predictions)
    targets = np.asarray(targets, dtype=np.float64)
    if predictions.shape != targets.shape:
        raise ShapeMismatchError('mse', [predictions.shape, targets.shape])
    residual = predictions - targets
    return ops.mean(residual * residual)
