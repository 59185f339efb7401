"""Model configuration, the assembled Timing-Matters model and prediction helpers."""
from dataclasses import asdict, dataclass, fields, replace
from typing import Any, Dict

import numpy as np

from datamodel.binning import BinningScheme, bin_to_representative_time, time_to_bin
from datamodel.records import SECONDS_PER_DAY
from datamodel.tensors import SessionTensors
from diffcore import ops
from diffcore.module import Identity, Linear, Module
from diffcore.tensor import DiffArray, grad_enabled
from embed.features import ActionFieldEmbedder
from exceptions import BinningError, ConfigurationError
from nets.encoders import ActionEncoder, SequenceEncoder, TimeEncoder
from utils.validation import require_positive

TASKS = ('classification', 'regression')
ABLATIONS = ('minus-rbf', 'minus-time-encoder', 'minus-sequence-encoder')


@dataclass
class ModelConfig:
    name: str = 'timing-matters'
    embed_dim: int = 50
    num_heads: int = 2
    num_layers: int = 2
    ff_dim: int = 200
    hidden_dim: int = 100
    num_bins: int = 96
    context_length: int = 9
    leaky_slope: float = 0.01
    positional_before: bool = False
    task: str = 'classification'
    num_devices: int = 16
    num_controls: int = 121
    seed: int = 0

    @property
    def output_dim(self) -> int:
        return self.num_bins if self.task == 'classification' else 1

    @property
    def scheme(self) -> BinningScheme:
        return BinningScheme(self.num_bins)

    def validate(self) -> 'ModelConfig':
        for key in ('embed_dim', 'num_heads', 'num_layers', 'ff_dim', 'hidden_dim',
                    'context_length', 'num_devices', 'num_controls'):
            require_positive(getattr(self, key), key)
        if self.task not in TASKS:
            raise ConfigurationError('task', f"task must be one of {TASKS}, got '{self.task}'")
        if self.embed_dim % self.num_heads:
            raise ConfigurationError('num_heads', f"embed_dim {self.embed_dim} not divisible by {self.num_heads} heads")
        try:
            BinningScheme(self.num_bins)
        except BinningError as e:
            raise ConfigurationError('num_bins', e.message) from e
        return self

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'ModelConfig':
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(sorted(unknown)[0], f"Unknown model settings: {sorted(unknown)}")
        return cls(**data).validate()

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)

    def with_updates(self, **changes) -> 'ModelConfig':
        return replace(self, **changes).validate()


class TimePredictor(Module):
    """Common surface of every model: config, forward(batch) and a swappable output layer."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        object.__setattr__(self, 'config', config)

    @property
    def name(self) -> str:
        return self.config.name

    def output_layer(self) -> Linear:
        raise NotImplementedError

    def set_output_layer(self, layer: Linear) -> None:
        raise NotImplementedError

    def _check_batch(self, batch: SessionTensors) -> None:
        if self.config.task == 'classification' and batch.num_bins != self.config.num_bins:
            raise BinningError(f"bins={batch.num_bins}",
                               f"Batch labelled with {batch.num_bins} bins, model predicts {self.config.num_bins}")

    def _finish(self, output: DiffArray) -> DiffArray:
        if self.config.task == 'regression':
            return ops.reshape(output, (output.shape[0],))
        return output


class TimingMattersModel(TimePredictor):
    """
    Embeddings -> action encoder (H, width d) and time encoder (width 3d) ->
    per-position concatenation (width 4d) -> sequence encoder -> logits.

    Ablations follow ``config.name``: 'minus-rbf' uses a second Time2Vec for the
    radial parts, 'minus-time-encoder' replaces the TCN with identity and
    'minus-sequence-encoder' replaces the sequence transformer with identity.
    """

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        config.validate()
        d = config.embed_dim
        rng = np.random.default_rng(config.seed)
        variant = config.name
        self.embedder = ActionFieldEmbedder(
            config.num_devices, config.num_controls, d, rng,
            radial='time2vec' if variant == 'minus-rbf' else 'rbf', shift_time_linear=False,
            shift_diff_linear=variant != 'minus-time-encoder')
        self.action_encoder = ActionEncoder(d, config.num_heads, config.num_layers, config.ff_dim, rng)
        self.time_encoder = TimeEncoder(
            d, rng, tcn=Identity() if variant == 'minus-time-encoder' else None, slope=config.leaky_slope)
        self.sequence_encoder = SequenceEncoder(
            width=4 * d, context_length=config.context_length, hidden_dim=config.hidden_dim,
            output_dim=config.output_dim, num_heads=config.num_heads, num_layers=config.num_layers,
            ff_dim=config.ff_dim, rng=rng, positional_before=config.positional_before,
            slope=config.leaky_slope,
            transformer=Identity() if variant == 'minus-sequence-encoder' else None,
        )

    def output_layer(self) -> Linear:
        return self.sequence_encoder.head

    def set_output_layer(self, layer: Linear) -> None:
        self.sequence_encoder.head = layer

    def encode(self, batch: SessionTensors) -> DiffArray:
        """Per-position fused sequence ŝ of width 4d."""
        parts = self.embedder(batch)
        actions = self.action_encoder([parts.device, parts.control, parts.date_periodic, parts.date_radial])
        times = self.time_encoder(parts.diff, parts.time_periodic, parts.time_radial)
        return ops.concat([actions, times], axis=-1)

    def forward(self, batch: SessionTensors) -> DiffArray:
        self._check_batch(batch)
        return self._finish(self.sequence_encoder(self.encode(batch)))


def clamp_seconds(seconds: np.ndarray) -> np.ndarray:
    return np.clip(seconds, 0.0, np.nextafter(float(SECONDS_PER_DAY), 0.0))


def predict_scores(model: TimePredictor, batch: SessionTensors) -> np.ndarray:
    """Eval-mode forward without graph recording."""
    was_training = model.training
    model.eval()
    try:
        with grad_enabled(False):
            return model(batch).values
    finally:
        model.train(was_training)


def predict_bins(model: TimePredictor, batch: SessionTensors) -> np.ndarray:
    """Argmax bin (lowest index on ties); regression output is mapped through its bin."""
    scores = predict_scores(model, batch)
    if model.config.task == 'regression':
        return np.asarray(time_to_bin(clamp_seconds(scores * SECONDS_PER_DAY), model.config.scheme))
    return np.argmax(scores, axis=1).astype(np.int64)


def predict_seconds(model: TimePredictor, batch: SessionTensors) -> np.ndarray:
    """Seconds after midnight in [0, 86400): bin midpoints for classifiers."""
    scores = predict_scores(model, batch)
    if model.config.task == 'regression':
        return clamp_seconds(scores * SECONDS_PER_DAY)
    return np.asarray(bin_to_representative_time(np.argmax(scores, axis=1), model.config.scheme))
