"""Epoch loop with validation-based model selection and early stopping."""
import time
from dataclasses import asdict, dataclass, field, fields
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from datamodel.records import SECONDS_PER_DAY
from datamodel.splits import DatasetSplit
from datamodel.tensors import SessionTensors, iterate_minibatches, to_tensors
from diffcore.optim import Adam
from diffcore.tensor import backward
from exceptions import ConfigurationError, TrainingError
from experiment.losses import cross_entropy_loss, mse_loss
from experiment.metrics import MetricReport, evaluate, precision_at_k
from utils.logging_utils import get_app_logger
from utils.run_logging import get_run_logger, jlog
from utils.validation import require_positive


@dataclass
class TrainConfig:
    batch_size: int = 64
    learning_rate: float = 1e-4
    weight_decay: float = 1e-4
    betas: Tuple[float, float] = (0.9, 0.999)
    eps: float = 1e-8
    max_epochs: int = 500
    patience: int = 20
    seed: int = 0

    def validate(self) -> 'TrainConfig':
        for key in ('batch_size', 'learning_rate', 'max_epochs', 'patience', 'eps'):
            require_positive(getattr(self, key), key)
        require_positive(self.weight_decay, 'weight_decay', allow_zero=True)
        if len(self.betas) != 2 or not all(0.0 <= b < 1.0 for b in self.betas):
            raise ConfigurationError('betas', f"betas must be two values in [0, 1), got {self.betas}")
        return self

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'TrainConfig':
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(sorted(unknown)[0], f"Unknown train settings: {sorted(unknown)}")
        data = dict(data)
        if 'betas' in data:
            data['betas'] = tuple(float(b) for b in data['betas'])
        return cls(**data).validate()

    def to_dict(self) -> Dict[str, Any]:
        data = asdict(self)
        data['betas'] = list(self.betas)
        return data


@dataclass
class EpochRecord:
    epoch: int
    train_loss: float
    val_precision: float


@dataclass
class TrainingResult:
    model: Any
    history: List[EpochRecord] = field(default_factory=list)
    best_epoch: int = 0
    best_val_precision: float = 0.0
    test_report: Optional[MetricReport] = None
    stopped_early: bool = False


def _loss(model, batch: SessionTensors):
    output = model(batch)
    if model.config.task == 'regression':
        return mse_loss(output, batch.target_seconds / SECONDS_PER_DAY)
    return cross_entropy_loss(output, batch.labels)


def train_epoch(model, optimizer: Adam, tensors: SessionTensors, batch_size: int,
                rng: np.random.Generator) -> float:
    """One pass of shuffled minibatches; returns the example-weighted mean loss."""
    model.train()
    total, count = 0.0, 0
    params = {name: p for name, p in model.named_parameters() if p.trainable}
    for batch in iterate_minibatches(tensors, batch_size, rng):
        loss = _loss(model, batch)
        backward(loss)
        optimizer.step(params)
        total += loss.item() * len(batch)
        count += len(batch)
    return total / max(count, 1)


def validation_precision(model, tensors: SessionTensors) -> float:
    """Precision at the model's own bin count (96 for AN, 8 for SmartSense by default)."""
    from nets.model import predict_bins

    predictions = np.concatenate([predict_bins(model, chunk) for chunk in iterate_minibatches(tensors, 512)])
    return precision_at_k(predictions, tensors.labels)


def train(model, split: DatasetSplit, config: Optional[TrainConfig] = None,
          run_id: str = '', dataset_id: str = '') -> TrainingResult:
    """
    Train with Adam, keep the best-validation state, stop on patience or max epochs,
    then restore that state and score the test partition once.

    Raises:
        TrainingError: empty train or validation partition
    """
    config = (config or TrainConfig()).validate()
    app_logger = get_app_logger()
    events = get_run_logger()
    model_id = run_id or model.config.name

    train_set = split.partition('train')
    val_set = split.partition('val')
    if not len(train_set) or not len(val_set):
        raise TrainingError('train', "Train and validation partitions must be non-empty")
    scheme = model.config.scheme
    train_tensors = to_tensors(train_set, scheme)
    val_tensors = to_tensors(val_set, scheme)

    rng = np.random.default_rng(config.seed)
    optimizer = Adam(config.learning_rate, config.weight_decay, config.betas, config.eps)
    result = TrainingResult(model=model, best_val_precision=-1.0)
    best_state = model.state_dict()
    stale = 0

    jlog(events, {'event': 'train_start', 'run_id': model_id, 'model': model.config.to_dict(),
                  'train': config.to_dict(), 'optimizer': optimizer.describe(),
                  'train_size': len(train_tensors), 'val_size': len(val_tensors)})
    for epoch in range(1, config.max_epochs + 1):
        started = time.perf_counter()
        train_loss = train_epoch(model, optimizer, train_tensors, config.batch_size, rng)
        val_precision = validation_precision(model, val_tensors)
        result.history.append(EpochRecord(epoch, train_loss, val_precision))
        jlog(events, {'event': 'epoch', 'run_id': model_id, 'epoch': epoch, 'train_loss': train_loss,
                      'val_precision': val_precision, 'seconds': time.perf_counter() - started})

        if val_precision > result.best_val_precision:
            result.best_val_precision = val_precision
            result.best_epoch = epoch
            best_state = model.state_dict()
            stale = 0
        else:
            stale += 1
            if stale >= config.patience:
                result.stopped_early = True
                break

    model.load_state_dict(best_state)
    model.eval()
    result.test_report = evaluate(model, split.release_test(), model_id=model_id, dataset_id=dataset_id)
    app_logger.log_training_operation(
        'train', model_id, True,
        f"best epoch {result.best_epoch}, val P({model.config.num_bins})={result.best_val_precision:.4f}, "
        f"test {result.test_report.precision}",
    )
    jlog(events, {'event': 'train_end', 'run_id': model_id, 'best_epoch': result.best_epoch,
                  'best_val_precision': result.best_val_precision, 'test': result.test_report.to_dict()})
    return result
