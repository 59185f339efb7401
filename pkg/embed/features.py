"""Per-action embedding of categorical and temporal fields."""
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np

from datamodel.records import DAYS_OF_YEAR, SECONDS_PER_DAY, ActionRecord, Schema, TimeDiffFeature
from datamodel.tensors import SessionTensors
from diffcore.module import Module
from diffcore.tensor import DiffArray
from embed.layers import DiffScale, LookupEmbedding, RbfLayer, Time2VecLayer
from exceptions import ConfigurationError

RADIAL_KINDS = ('rbf', 'time2vec', None)


@dataclass
class ActionFields:
    """Embedded fields of a (B, T) batch; every part is (B, T, d)."""
    device: DiffArray
    control: DiffArray
    time_periodic: DiffArray
    date_periodic: DiffArray
    diff: DiffArray
    time_radial: Optional[DiffArray] = None
    date_radial: Optional[DiffArray] = None


class ActionFieldEmbedder(Module):
    """
    Owns the device/control lookups, the time and date embeddings and the
    DiffScale + Time2Vec path for time differences.

    ``radial`` selects the second temporal embedding: 'rbf' (default),
    'time2vec' (the minus-rbf ablation) or None (baselines, periodic only).

    ``shift_time_linear`` and ``shift_diff_linear`` give the Time2Vec layers of
    the time-of-day and time-difference paths a ψ₀ on their linear element;
    a model that batch normalizes those embeddings turns it off.
    """

    def __init__(self, num_devices: int, num_controls: int, dim: int, rng: np.random.Generator,
                 radial: Optional[str] = 'rbf', shift_time_linear: bool = True,
                 shift_diff_linear: bool = True):
        super().__init__()
        if radial not in RADIAL_KINDS:
            raise ConfigurationError('radial', f"radial must be one of {RADIAL_KINDS}, got {radial!r}")
        self.dim = dim
        self.radial = radial
        self.device = LookupEmbedding(num_devices, dim, rng, field='device')
        self.control = LookupEmbedding(num_controls, dim, rng, field='control')
        self.time_periodic = Time2VecLayer(dim, rng, shift_linear=shift_time_linear)
        self.date_periodic = Time2VecLayer(dim, rng)
        if radial == 'rbf':
            self.time_radial = RbfLayer(dim, rng)
            self.date_radial = RbfLayer(dim, rng)
        elif radial == 'time2vec':
            self.time_radial = Time2VecLayer(dim, rng, shift_linear=shift_time_linear)
            self.date_radial = Time2VecLayer(dim, rng)
        self.diff_scale = DiffScale()
        self.diff_periodic = Time2VecLayer(dim, rng, shift_linear=shift_diff_linear)

    def forward(self, batch: SessionTensors) -> ActionFields:
        fields = ActionFields(
            device=self.device(batch.devices),
            control=self.control(batch.controls),
            time_periodic=self.time_periodic(batch.times),
            date_periodic=self.date_periodic(batch.days),
            diff=embed_time_diff(batch.diffs, self.diff_scale, self.diff_periodic),
        )
        if self.radial is not None:
            fields.time_radial = self.time_radial(batch.times)
            fields.date_radial = self.date_radial(batch.days)
        return fields


def normalized_time(record: ActionRecord, schema: Schema = Schema.AN) -> Tuple[float, float]:
    """(time-of-day / 86400, day / 366) as fed to the temporal embeddings."""
    seconds = record.absolute_seconds(schema) - record.day * SECONDS_PER_DAY
    return seconds / SECONDS_PER_DAY, record.day / DAYS_OF_YEAR


def embed_action_fields(record: ActionRecord, embedder: ActionFieldEmbedder,
                        schema: Schema = Schema.AN) -> Tuple[DiffArray, ...]:
    """
    (e1, e2, z11, z12, z21, z22) for one action: device and control lookups,
    then periodic and radial embeddings of the time of day and of the date.
    """
    if embedder.radial is None:
        raise ConfigurationError('radial', "embed_action_fields needs a radial time embedding")
    time_value, date_value = normalized_time(record, schema)
    times = np.array([time_value])
    days = np.array([date_value])
    squeeze = lambda x: x.reshape(embedder.dim)
    return (
        squeeze(embedder.device(np.array([record.device]))),
        squeeze(embedder.control(np.array([record.control]))),
        squeeze(embedder.time_periodic(times)),
        squeeze(embedder.time_radial(times)),
        squeeze(embedder.date_periodic(days)),
        squeeze(embedder.date_radial(days)),
    )


def embed_time_diff(diffs, scale: DiffScale, t2v: Time2VecLayer) -> DiffArray:
    """z3_i = time2vec(scale * diffs[i]); accepts a TimeDiffFeature or an array of any shape."""
    if isinstance(diffs, TimeDiffFeature):
        diffs = diffs.diffs
    return t2v(scale(np.asarray(diffs, dtype=np.float64)))
