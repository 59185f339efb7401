"""Seeded train/val/test partitioning of sessions."""
from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from datamodel.records import Session, SessionDataset
from exceptions import DataAccessError, SplitError

DEFAULT_RATIOS = (7, 1, 2)
PARTITIONS = ('train', 'val', 'test')


@dataclass
class DatasetSplit:
    """
    Disjoint train/val/test partitions.

    Partitions are reached through ``partition(name)``, which appends to
    ``access_log``; ``strict`` mode refuses to hand out the test partition
    until ``release_test()`` has been called.
    """
    train: SessionDataset
    val: SessionDataset
    test: SessionDataset
    ratios: Tuple[float, float, float] = DEFAULT_RATIOS
    seed: int = 0
    strict: bool = False
    access_log: List[str] = field(default_factory=list)
    _test_released: bool = False

    def partition(self, name: str) -> SessionDataset:
        if name not in PARTITIONS:
            raise DataAccessError(name, f"Unknown partition '{name}'")
        if name == 'test' and self.strict and not self._test_released:
            raise DataAccessError(name, "Test partition requested before final evaluation")
        self.access_log.append(name)
        return getattr(self, name)

    def release_test(self) -> SessionDataset:
        self._test_released = True
        return self.partition('test')

    def sizes(self) -> Tuple[int, int, int]:
        return len(self.train), len(self.val), len(self.test)

    def first_access(self, name: str) -> int:
        """Position of the first access to ``name`` in the log, or -1."""
        return self.access_log.index(name) if name in self.access_log else -1


def split_sizes(total: int, ratios: Sequence[float] = DEFAULT_RATIOS) -> Tuple[int, int, int]:
    """floor(total * r_train / sum) and floor(total * r_val / sum); the remainder goes to test."""
    if len(ratios) != 3 or any(r <= 0 for r in ratios):
        raise SplitError(f"Ratios must be three positive numbers, got {tuple(ratios)}")
    if total < 3:
        raise SplitError(f"Cannot split {total} sessions into 3 parts")
    weight = float(sum(ratios))
    n_train = int(np.floor(total * ratios[0] / weight + 1e-9))
    n_val = int(np.floor(total * ratios[1] / weight + 1e-9))
    n_test = total - n_train - n_val
    if min(n_train, n_val, n_test) <= 0:
        raise SplitError(f"Ratios {tuple(ratios)} leave an empty partition for {total} sessions")
    return n_train, n_val, n_test


def split(dataset: SessionDataset, ratios: Sequence[float] = DEFAULT_RATIOS, seed: int = 0,
          strict: bool = False) -> DatasetSplit:
    """
    Shuffle sessions with ``seed`` and partition them by ``ratios``.

    Args:
        dataset: Sessions to split (the session, not the user, is the unit)
        ratios: Relative sizes of train, val and test
        seed: Shuffle seed; the same seed always yields the same membership
        strict: Guard the test partition until ``release_test()``

    Raises:
        SplitError: fewer sessions than partitions, or non-positive ratios
    """
    n_train, n_val, _ = split_sizes(len(dataset), ratios)
    order = np.random.default_rng(seed).permutation(len(dataset))
    sessions: Sequence[Session] = dataset.sessions
    pick = lambda idx: dataset.with_sessions([sessions[i] for i in idx])
    return DatasetSplit(
        train=pick(order[:n_train]),
        val=pick(order[n_train:n_train + n_val]),
        test=pick(order[n_train + n_val:]),
        ratios=tuple(float(r) for r in ratios),
        seed=seed,
        strict=strict,
    )
