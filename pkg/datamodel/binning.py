"""Discretization of the day into k equal time bins."""
from dataclasses import dataclass
from typing import Union

import numpy as np

from datamodel.records import SECONDS_PER_DAY
from exceptions import BinningError

SUPPORTED_BIN_COUNTS = (8, 12, 24, 48, 96, 288)
DEFAULT_BIN_COUNT = 96

ArrayLike = Union[int, float, np.ndarray]


@dataclass(frozen=True)
class BinningScheme:
    num_bins: int = DEFAULT_BIN_COUNT

    def __post_init__(self):
        k = self.num_bins
        if not isinstance(k, (int, np.integer)) or k <= 0 or SECONDS_PER_DAY % k:
            raise BinningError(f"bins={k}", f"Unsupported bin count {k}: 86400 must be divisible by it")

    @property
    def bin_width(self) -> float:
        return SECONDS_PER_DAY / self.num_bins

    def to_dict(self) -> dict:
        return {'num_bins': int(self.num_bins)}


def time_to_bin(time_seconds: ArrayLike, scheme: BinningScheme) -> ArrayLike:
    """floor(time / bin-width) for 0 <= time < 86400 (scalars or arrays)."""
    times = np.asarray(time_seconds, dtype=np.float64)
    if times.size and (times.min() < 0 or times.max() >= SECONDS_PER_DAY or not np.all(np.isfinite(times))):
        raise BinningError('time_to_bin', f"time out of range [0, 86400): {time_seconds}")
    bins = np.floor(times * scheme.num_bins / SECONDS_PER_DAY).astype(np.int64)
    return int(bins) if bins.ndim == 0 else bins


def bin_to_representative_time(bin_index: ArrayLike, scheme: BinningScheme) -> ArrayLike:
    """Midpoint of the bin: (bin + 0.5) * bin-width."""
    bins = np.asarray(bin_index)
    if bins.size and (bins.min() < 0 or bins.max() >= scheme.num_bins):
        raise BinningError('bin_to_representative_time',
                           f"bin out of range [0, {scheme.num_bins}): {bin_index}")
    seconds = (bins.astype(np.float64) + 0.5) * scheme.bin_width
    return float(seconds) if seconds.ndim == 0 else seconds


def coarsen_bin(bin_index: ArrayLike, from_bins: int = 96, to_bins: int = 8) -> ArrayLike:
    """Map a fine bin to the coarse bin containing it: floor(bin / (from/to))."""
    if to_bins <= 0 or from_bins % to_bins:
        raise BinningError('coarsen_bin', f"Cannot coarsen {from_bins} bins to {to_bins}")
    bins = np.asarray(bin_index)
    if bins.size and (bins.min() < 0 or bins.max() >= from_bins):
        raise BinningError('coarsen_bin', f"bin out of range [0, {from_bins}): {bin_index}")
    coarse = bins // (from_bins // to_bins)
    return int(coarse) if coarse.ndim == 0 else coarse.astype(np.int64)
