"""Simple baselines sharing the model's input/output contract.

Each action is embedded into five d-wide parts (device, control and Time2Vec
embeddings of time of day, date and scaled time difference).
"""
import numpy as np

from datamodel.tensors import SessionTensors
from diffcore import ops
from diffcore.module import Linear, Module, ModuleList, Parameter
from diffcore.tensor import DiffArray
from embed.features import ActionFieldEmbedder
from nets.model import ModelConfig, TimePredictor
from nets.recurrent import LSTM
from nets.transformer import TransformerEncoder

NUM_FIELDS = 5


class FeedForward(Module):
    """Linear layers with leaky ReLU between them."""

    def __init__(self, sizes, rng: np.random.Generator, slope: float = 0.01):
        super().__init__()
        self.slope = slope
        self.layers = ModuleList(Linear(a, b, rng) for a, b in zip(sizes[:-1], sizes[1:]))

    def forward(self, x: DiffArray) -> DiffArray:
        for i, layer in enumerate(self.layers):
            if i:
                x = ops.leaky_relu(x, self.slope)
            x = layer(x)
        return x


class BaselineModel(TimePredictor):
    def __init__(self, config: ModelConfig):
        super().__init__(config)
        config.validate()
        object.__setattr__(self, 'rng', np.random.default_rng(config.seed))
        self.embedder = ActionFieldEmbedder(config.num_devices, config.num_controls, config.embed_dim,
                                            self.rng, radial=None)

    @property
    def step_width(self) -> int:
        return NUM_FIELDS * self.config.embed_dim

    def field_parts(self, batch: SessionTensors):
        parts = self.embedder(batch)
        return [parts.device, parts.control, parts.time_periodic, parts.date_periodic, parts.diff]

    def steps(self, batch: SessionTensors) -> DiffArray:
        """(B, T, 5d) per-step concatenation."""
        return ops.concat(self.field_parts(batch), axis=-1)

    def output_layer(self) -> Linear:
        return self.head

    def set_output_layer(self, layer: Linear) -> None:
        self.head = layer

    def features(self, batch: SessionTensors) -> DiffArray:
        raise NotImplementedError

    def forward(self, batch: SessionTensors) -> DiffArray:
        self._check_batch(batch)
        return self._finish(self.head(self.features(batch)))


class MLPBaseline(BaselineModel):
    """Flatten all action embeddings and apply four fully connected layers."""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        h = config.hidden_dim
        self.body = FeedForward([config.context_length * self.step_width, h, h, h], self.rng, config.leaky_slope)
        self.head = Linear(h, config.output_dim, self.rng)

    def features(self, batch):
        return ops.leaky_relu(self.body(ops.flatten(self.steps(batch), 1)), self.config.leaky_slope)


class MLPTwoStepBaseline(BaselineModel):
    """Per-action MLP, concatenate the action vectors, then a second MLP."""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        h = config.hidden_dim
        self.action_mlp = FeedForward([self.step_width, h, h], self.rng, config.leaky_slope)
        self.sequence_mlp = FeedForward([config.context_length * h, h], self.rng, config.leaky_slope)
        self.head = Linear(h, config.output_dim, self.rng)

    def features(self, batch):
        slope = self.config.leaky_slope
        actions = ops.leaky_relu(self.action_mlp(self.steps(batch)), slope)
        return ops.leaky_relu(self.sequence_mlp(ops.flatten(actions, 1)), slope)


class LSTMBaseline(BaselineModel):
    """Two-layer LSTM over per-step concatenated embeddings; last hidden state feeds the head."""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        self.lstm = LSTM(self.step_width, config.hidden_dim, 2, self.rng)
        self.head = Linear(config.hidden_dim, config.output_dim, self.rng)

    def features(self, batch):
        return self.lstm(self.steps(batch))[:, -1, :]


class MLPLSTMBaseline(BaselineModel):
    """Per-action MLP followed by a two-layer LSTM."""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        h = config.hidden_dim
        self.action_mlp = FeedForward([self.step_width, h, h], self.rng, config.leaky_slope)
        self.lstm = LSTM(h, h, 2, self.rng)
        self.head = Linear(h, config.output_dim, self.rng)

    def features(self, batch):
        actions = ops.leaky_relu(self.action_mlp(self.steps(batch)), self.config.leaky_slope)
        return self.lstm(actions)[:, -1, :]


class LSTMTwoStepBaseline(BaselineModel):
    """One LSTM per embedded field, then an LSTM over their concatenated outputs."""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        d, h = config.embed_dim, config.hidden_dim
        field_hidden = max(1, h // NUM_FIELDS)
        self.field_lstms = ModuleList(LSTM(d, field_hidden, 1, self.rng) for _ in range(NUM_FIELDS))
        self.lstm = LSTM(NUM_FIELDS * field_hidden, h, 1, self.rng)
        self.head = Linear(h, config.output_dim, self.rng)

    def features(self, batch):
        per_field = [lstm(part) for lstm, part in zip(self.field_lstms, self.field_parts(batch))]
        return self.lstm(ops.concat(per_field, axis=-1))[:, -1, :]


class TransformerBaseline(BaselineModel):
    """Positional matrix plus stacked encoder layers over per-step concatenations, mean-pooled."""

    def __init__(self, config: ModelConfig):
        super().__init__(config)
        width = self.step_width
        self.positional = Parameter(self.rng.normal(0.0, 0.02, size=(config.context_length, width)))
        self.encoder = TransformerEncoder(width, config.num_heads, config.num_layers, config.ff_dim, self.rng)
        self.head = Linear(width, config.output_dim, self.rng)

    def features(self, batch):
        return ops.mean(self.encoder(self.steps(batch) + self.positional), axis=1)


BASELINES = {
    'mlp': MLPBaseline,
    'mlp-2step': MLPTwoStepBaseline,
    'lstm': LSTMBaseline,
    'mlp-lstm': MLPLSTMBaseline,
    'lstm-2step': LSTMTwoStepBaseline,
    'transformer': TransformerBaseline,
}
