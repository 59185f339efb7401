"""Precision(k), RMSE and metric reports."""
from dataclasses import dataclass, field
from typing import Dict, Iterable, Optional, Union

import numpy as np

from datamodel.binning import SUPPORTED_BIN_COUNTS, BinningScheme, bin_to_representative_time, coarsen_bin
from datamodel.records import SECONDS_PER_DAY, Schema, SessionDataset
from datamodel.tensors import SessionTensors, iterate_minibatches, to_tensors
from exceptions import BinningError, InsufficientDataError, ShapeMismatchError


def precision_at_k(predicted: np.ndarray, true: np.ndarray, k: Optional[int] = None,
                   from_bins: Optional[int] = None) -> float:
    """
    Fraction of exact bin matches.

    When ``k`` and ``from_bins`` are both given and differ, both sides are first
    coarsened from ``from_bins`` to ``k`` bins.
    """
    predicted, true = np.asarray(predicted), np.asarray(true)
    if predicted.shape != true.shape:
        raise ShapeMismatchError('precision_at_k', [predicted.shape, true.shape])
    if predicted.size == 0:
        raise InsufficientDataError('precision_at_k', "No predictions to score")
    if k is not None and from_bins is not None and k != from_bins:
        predicted = coarsen_bin(predicted, from_bins, k)
        true = coarsen_bin(true, from_bins, k)
    return float(np.mean(predicted == true))


def rmse(predicted_seconds: np.ndarray, true_seconds: np.ndarray, circular: bool = False) -> float:
    """
    Root mean squared error in seconds.

    Distance is linear by default; ``circular=True`` wraps around midnight.
    """
    predicted = np.asarray(predicted_seconds, dtype=np.float64)
    true = np.asarray(true_seconds, dtype=np.float64)
    if predicted.shape != true.shape:
        raise ShapeMismatchError('rmse', [predicted.shape, true.shape])
    if predicted.size == 0:
        raise InsufficientDataError('rmse', "No predictions to score")
    diff = np.abs(predicted - true)
    if circular:
        diff = np.minimum(diff, SECONDS_PER_DAY - diff)
    return float(np.sqrt(np.mean(diff * diff)))


def rmse_from_bins(predicted_bins: np.ndarray, true_seconds: np.ndarray, scheme: BinningScheme,
                   circular: bool = False) -> float:
    """RMSE of class outputs, each mapped to its bin midpoint."""
    return rmse(bin_to_representative_time(np.asarray(predicted_bins), scheme), true_seconds, circular)


def coarsening_report(predicted: np.ndarray, true: np.ndarray, from_bins: int = 96) -> Dict[int, float]:
    """Precision at every supported bin count that divides ``from_bins``."""
    return {
        k: precision_at_k(predicted, true, k=k, from_bins=from_bins)
        for k in SUPPORTED_BIN_COUNTS if k <= from_bins and from_bins % k == 0
    }


@dataclass
class MetricReport:
    precision: Dict[int, float]
    rmse: float
    num_examples: int
    model_id: str = ''
    dataset_id: str = ''
    extras: Dict[str, float] = field(default_factory=dict)

    def __post_init__(self):
        for k, value in self.precision.items():
            if not 0.0 <= value <= 1.0:
                raise ValueError(f"Precision({k}) out of [0, 1]: {value}")
        if self.rmse < 0:
            raise ValueError(f"RMSE must be >= 0, got {self.rmse}")

    def precision_at(self, k: int) -> float:
        return self.precision[k]

    def to_dict(self) -> dict:
        return {
            'model_id': self.model_id,
            'dataset_id': self.dataset_id,
            'num_examples': self.num_examples,
            'precision': {str(k): v for k, v in sorted(self.precision.items(), reverse=True)},
            'rmse': self.rmse,
            **({'extras': self.extras} if self.extras else {}),
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'MetricReport':
        return cls(
            precision={int(k): float(v) for k, v in data['precision'].items()},
            rmse=float(data['rmse']),
            num_examples=int(data['num_examples']),
            model_id=data.get('model_id', ''),
            dataset_id=data.get('dataset_id', ''),
            extras=dict(data.get('extras') or {}),
        )


def default_ks(num_bins: int, schema: Schema = Schema.AN) -> tuple:
    """The model's own k, plus 8 when it divides k."""
    if schema is Schema.SMARTSENSE:
        return (8,)
    return tuple(sorted({num_bins} | ({8} if num_bins % 8 == 0 else set()), reverse=True))


def evaluate(model, data: Union[SessionDataset, SessionTensors], ks: Optional[Iterable[int]] = None,
             model_id: str = '', dataset_id: str = '', circular: bool = False,
             batch_size: int = 512) -> MetricReport:
    """
    Score ``model`` without training.

    Every requested k must divide the model's bin count; predictions and
    labels are coarsened to it.

    Raises:
        BinningError: a requested k is incompatible with the model
    """
    from nets.model import predict_bins, predict_seconds

    model_k = model.config.num_bins
    batch = data if isinstance(data, SessionTensors) else to_tensors(data, model.config.scheme)
    ks = tuple(ks) if ks else default_ks(model_k, batch.schema)
    for k in ks:
        if k > model_k or model_k % k:
            raise BinningError(f"bins={k}", f"Cannot report Precision({k}) for a {model_k}-bin model")

    predicted_bins, predicted_seconds = [], []
    for chunk in iterate_minibatches(batch, batch_size):
        predicted_bins.append(predict_bins(model, chunk))
        predicted_seconds.append(predict_seconds(model, chunk))
    predicted_bins = np.concatenate(predicted_bins)
    predicted_seconds = np.concatenate(predicted_seconds)

    precision = {k: precision_at_k(predicted_bins, batch.labels, k=k, from_bins=model_k) for k in ks}
    return MetricReport(
        precision=precision,
        rmse=rmse(predicted_seconds, batch.target_seconds, circular=circular),
        num_examples=len(batch),
        model_id=model_id or model.config.name,
        dataset_id=dataset_id,
    )
