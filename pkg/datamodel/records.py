"""Action records, sessions and the time-difference feature."""
from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, Iterator, Optional, Sequence, Tuple

import numpy as np

from exceptions import RecordRangeError, SchemaError, VocabularyError

SECONDS_PER_DAY = 86400
SESSION_LENGTH = 10
DAYS_OF_YEAR = 366
DAYS_OF_WEEK = 7
SMARTSENSE_TIME_RANGES = 8
SMARTSENSE_RANGE_SECONDS = SECONDS_PER_DAY // SMARTSENSE_TIME_RANGES


class Schema(str, Enum):
    AN = 'AN'
    SMARTSENSE = 'SmartSense'

    @classmethod
    def parse(cls, value: str) -> 'Schema':
        for member in cls:
            if member.value.lower() == str(value).lower():
                return member
        raise SchemaError('AN|SmartSense', str(value))


@dataclass(frozen=True)
class ActionRecord:
    """One device interaction.

    ``day`` is day-of-year (AN) or day-of-week (SmartSense); ``time`` is seconds
    after midnight (AN) or the 3-hour range index (SmartSense).
    """
    device: int
    control: int
    day: int
    time: int
    user: Optional[int] = None
    device_control: Optional[int] = None

    def absolute_seconds(self, schema: Schema) -> float:
        """Seconds since day 0 at midnight; SmartSense ranges use their midpoint."""
        if schema is Schema.AN:
            return float(self.day * SECONDS_PER_DAY + self.time)
        return float(self.day * SECONDS_PER_DAY + (self.time + 0.5) * SMARTSENSE_RANGE_SECONDS)


def time_bound(schema: Schema) -> int:
    return SECONDS_PER_DAY if schema is Schema.AN else SMARTSENSE_TIME_RANGES


def day_bound(schema: Schema) -> int:
    return DAYS_OF_YEAR if schema is Schema.AN else DAYS_OF_WEEK


@dataclass(frozen=True)
class Session:
    """A window of consecutive actions of one user; the last supplies the target time."""
    user: Optional[int]
    actions: Tuple[ActionRecord, ...]
    schema: Schema = Schema.AN

    def __post_init__(self):
        object.__setattr__(self, 'actions', tuple(self.actions))

    def __len__(self) -> int:
        return len(self.actions)

    @property
    def inputs(self) -> Tuple[ActionRecord, ...]:
        return self.actions[:-1]

    @property
    def target(self) -> ActionRecord:
        return self.actions[-1]

    def validate(self, num_devices: int, num_controls: int, length: int = SESSION_LENGTH) -> None:
        """Check length, field ranges and (AN) non-decreasing (day, time)."""
        if len(self.actions) != length:
            raise SchemaError(f"session of {length} actions", f"{len(self.actions)} actions")
        t_max, d_max = time_bound(self.schema), day_bound(self.schema)
        previous = None
        for i, action in enumerate(self.actions):
            if not 0 <= action.time < t_max:
                raise RecordRangeError(i, 'time', action.time)
            if not 0 <= action.day < d_max:
                raise RecordRangeError(i, 'day', action.day)
            if not 0 <= action.device < num_devices:
                raise VocabularyError('device', action.device, num_devices)
            if not 0 <= action.control < num_controls:
                raise VocabularyError('control', action.control, num_controls)
            if self.schema is Schema.AN:
                key = (action.day, action.time)
                if previous is not None and key < previous:
                    raise RecordRangeError(i, 'time', action.time,
                                           f"Action {i}: (day, time) {key} precedes {previous}")
                previous = key


@dataclass(frozen=True)
class TimeDiffFeature:
    """Seconds between consecutive input actions, with a leading zero."""
    diffs: np.ndarray

    def __len__(self) -> int:
        return len(self.diffs)


def time_diff_feature(session: Session) -> TimeDiffFeature:
    """Diffs over the session's input actions only (the target is never read)."""
    inputs = session.inputs
    seconds = np.array([a.absolute_seconds(session.schema) for a in inputs], dtype=np.float64)
    diffs = np.zeros(len(inputs), dtype=np.float64)
    diffs[1:] = np.diff(seconds)
    if session.schema is Schema.SMARTSENSE:
        # day-of-week wraps at the end of the week
        diffs[diffs < 0] += DAYS_OF_WEEK * SECONDS_PER_DAY
    return TimeDiffFeature(diffs)


@dataclass(frozen=True)
class SessionDataset:
    """An immutable collection of sessions plus the vocabulary sizes from its header."""
    sessions: Tuple[Session, ...]
    schema: Schema
    num_devices: int
    num_controls: int
    num_users: Optional[int] = None
    num_device_controls: Optional[int] = None
    session_length: int = SESSION_LENGTH
    metadata: Dict[str, object] = field(default_factory=dict)

    def __post_init__(self):
        object.__setattr__(self, 'sessions', tuple(self.sessions))

    def __len__(self) -> int:
        return len(self.sessions)

    def __iter__(self) -> Iterator[Session]:
        return iter(self.sessions)

    def __getitem__(self, i):
        return self.sessions[i]

    def with_sessions(self, sessions: Sequence[Session], session_length: Optional[int] = None) -> 'SessionDataset':
        return SessionDataset(
            sessions=tuple(sessions), schema=self.schema, num_devices=self.num_devices,
            num_controls=self.num_controls, num_users=self.num_users,
            num_device_controls=self.num_device_controls,
            session_length=session_length or self.session_length, metadata=dict(self.metadata),
        )

    def validate(self) -> None:
        for session in self.sessions:
            session.validate(self.num_devices, self.num_controls, self.session_length)
