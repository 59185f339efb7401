"""Batching sessions into the index and feature arrays the networks consume."""
from dataclasses import dataclass
from typing import Optional, Sequence

import numpy as np

from datamodel.binning import BinningScheme, time_to_bin
from datamodel.records import (
    DAYS_OF_WEEK, DAYS_OF_YEAR, SECONDS_PER_DAY, SMARTSENSE_RANGE_SECONDS, SMARTSENSE_TIME_RANGES,
    Schema, Session, SessionDataset,
)
from exceptions import BinningError, InsufficientDataError


@dataclass(frozen=True)
class SessionTensors:
    """
    Arrays for B sessions with T = length - 1 input actions each.

    ``times`` is seconds / 86400 in [0, 1); ``days`` is day / 366 (both schemas);
    ``diffs`` are raw seconds with a leading zero per session; ``labels`` are
    target bins under the scheme used to build the batch.
    """
    devices: np.ndarray         # (B, T) int
    controls: np.ndarray        # (B, T) int
    days: np.ndarray            # (B, T) float
    times: np.ndarray           # (B, T) float
    diffs: np.ndarray           # (B, T) float
    labels: np.ndarray          # (B,) int
    target_seconds: np.ndarray  # (B,) float
    num_bins: int
    schema: Schema = Schema.AN
    users: Optional[np.ndarray] = None

    def __len__(self) -> int:
        return int(self.labels.shape[0])

    @property
    def context_length(self) -> int:
        return int(self.devices.shape[1])

    def take(self, indices: Sequence[int]) -> 'SessionTensors':
        idx = np.asarray(indices, dtype=np.int64)
        return SessionTensors(
            devices=self.devices[idx], controls=self.controls[idx], days=self.days[idx],
            times=self.times[idx], diffs=self.diffs[idx], labels=self.labels[idx],
            target_seconds=self.target_seconds[idx], num_bins=self.num_bins, schema=self.schema,
            users=None if self.users is None else self.users[idx],
        )


def _seconds_of_day(time_field: np.ndarray, schema: Schema) -> np.ndarray:
    if schema is Schema.AN:
        return time_field.astype(np.float64)
    return (time_field.astype(np.float64) + 0.5) * SMARTSENSE_RANGE_SECONDS


def to_tensors(sessions: Sequence[Session], scheme: BinningScheme,
               schema: Schema = Schema.AN) -> SessionTensors:
    """
    Build a batch; the last action of each session only contributes its time as the label.

    SmartSense data carries 3-hour ranges only, so it is labelled with the
    range index itself and requires an 8-bin scheme.
    """
    if isinstance(sessions, SessionDataset):
        schema = sessions.schema
        sessions = sessions.sessions
    if not sessions:
        raise InsufficientDataError('to_tensors', "No sessions to batch")
    if schema is Schema.SMARTSENSE and scheme.num_bins != SMARTSENSE_TIME_RANGES:
        raise BinningError(f"bins={scheme.num_bins}",
                           "SmartSense data holds only 3-hour ranges; use 8 bins")

    fields = np.array([[(a.device, a.control, a.day, a.time) for a in s.actions] for s in sessions],
                      dtype=np.int64)  # (B, n, 4)
    devices, controls, days, time_field = (fields[:, :, i] for i in range(4))
    seconds = _seconds_of_day(time_field, schema)

    inputs = slice(0, fields.shape[1] - 1)
    absolute = days[:, inputs] * float(SECONDS_PER_DAY) + seconds[:, inputs]
    diffs = np.zeros_like(absolute)
    diffs[:, 1:] = np.diff(absolute, axis=1)
    if schema is Schema.SMARTSENSE:
        diffs[diffs < 0] += DAYS_OF_WEEK * SECONDS_PER_DAY

    target_seconds = seconds[:, -1]
    if schema is Schema.AN:
        labels = np.asarray(time_to_bin(target_seconds, scheme), dtype=np.int64)
    else:
        labels = time_field[:, -1].copy()

    users = None
    if all(s.user is not None for s in sessions):
        users = np.array([s.user for s in sessions], dtype=np.int64)

    return SessionTensors(
        devices=devices[:, inputs].copy(),
        controls=controls[:, inputs].copy(),
        days=days[:, inputs] / float(DAYS_OF_YEAR),
        times=seconds[:, inputs] / float(SECONDS_PER_DAY),
        diffs=diffs,
        labels=labels,
        target_seconds=target_seconds,
        num_bins=scheme.num_bins,
        schema=schema,
        users=users,
    )


def iterate_minibatches(tensors: SessionTensors, batch_size: int, rng: Optional[np.random.Generator] = None):
    """Yield SessionTensors minibatches; shuffled when ``rng`` is given."""
    order = np.arange(len(tensors)) if rng is None else rng.permutation(len(tensors))
    for start in range(0, len(order), batch_size):
        yield tensors.take(order[start:start + batch_size])
