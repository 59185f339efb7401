"""Routine-driven synthetic smart-home logs in the AN schema."""
import logging
from dataclasses import asdict, dataclass, fields
from datetime import date, timedelta
from typing import Any, Dict, List, Optional

import numpy as np
from dateutil import parser as date_parser

from datamodel.records import SECONDS_PER_DAY, SESSION_LENGTH, ActionRecord, Schema, SessionDataset
from datamodel.streams import ActionStream, window
from exceptions import ConfigurationError, GeneratorError
from syngen.routines import RoutineBank, RoutineSpec
from utils.logging_utils import get_app_logger
from utils.validation import require_positive

logger = logging.getLogger(__name__)


@dataclass
class GeneratorConfig:
    num_users: int = 39
    num_devices: int = 16
    num_controls: int = 121
    target_instances: Optional[int] = 11665
    start_date: str = '2019-01-01'
    end_date: str = '2019-06-30'
    session_length: int = SESSION_LENGTH
    seed: int = 0
    routine_bank: Optional[str] = None

    def dates(self) -> tuple:
        try:
            start = date_parser.isoparse(str(self.start_date)).date()
            end = date_parser.isoparse(str(self.end_date)).date()
        except ValueError as e:
            raise ConfigurationError('start_date', f"Cannot parse generator dates: {e}") from e
        return start, end

    def validate(self) -> 'GeneratorConfig':
        require_positive(self.num_users, 'num_users')
        require_positive(self.num_devices, 'num_devices')
        require_positive(self.num_controls, 'num_controls')
        if self.target_instances is not None:
            require_positive(self.target_instances, 'target_instances')
        if self.session_length < 2:
            raise ConfigurationError('session_length', "Sessions need at least one input and one target")
        start, end = self.dates()
        if end < start:
            raise ConfigurationError('end_date', f"end_date {end} precedes start_date {start}")
        if start.year != end.year:
            raise ConfigurationError('end_date', "Date range must lie within one calendar year (day-of-year field)")
        return self

    @classmethod
    def from_dict(cls, data: Dict[str, Any]) -> 'GeneratorConfig':
        known = {f.name for f in fields(cls)}
        unknown = set(data) - known
        if unknown:
            raise ConfigurationError(sorted(unknown)[0], f"Unknown generator settings: {sorted(unknown)}")
        return cls(**data).validate()

    def to_dict(self) -> Dict[str, Any]:
        return asdict(self)


def _user_stream(spec: RoutineSpec, bank: RoutineBank, start: date, num_days: int, seed: int) -> ActionStream:
    """Sample one user's actions; the per-user generator makes users independent of each other."""
    rng = np.random.default_rng([seed, spec.user])
    first_day = start.timetuple().tm_yday - 1
    events = []
    counter = 0
    for day_index in range(num_days):
        weekday = (start + timedelta(days=day_index)).weekday()
        for routine in spec.routines:
            fires = rng.random() < routine.probability
            offset = rng.normal(routine.mean, routine.jitter)
            if not fires or weekday not in routine.days:
                continue
            seconds = int(np.floor(offset))
            # crossing midnight moves the action to the neighbouring day
            day_shift, seconds = divmod(seconds, SECONDS_PER_DAY)
            target_day = day_index + day_shift
            if 0 <= target_day < num_days:
                events.append((target_day, seconds, counter, routine.device, routine.control))
                counter += 1
        for _ in range(rng.poisson(spec.noise_rate)):
            control = int(rng.integers(0, bank.num_controls))
            seconds = int(rng.integers(0, SECONDS_PER_DAY))
            events.append((day_index, seconds, counter, bank.control_device[control], control))
            counter += 1
    events.sort()
    actions = tuple(
        ActionRecord(device=device, control=control, day=first_day + day, time=seconds, user=spec.user)
        for day, seconds, _, device, control in events
    )
    return ActionStream(user=spec.user, actions=actions)


def _select_specs(config: GeneratorConfig, bank: RoutineBank) -> List[RoutineSpec]:
    if bank.num_devices != config.num_devices or bank.num_controls != config.num_controls:
        raise ConfigurationError(
            'routine_bank',
            f"Bank vocabulary ({bank.num_devices} devices, {bank.num_controls} controls) does not match "
            f"config ({config.num_devices} devices, {config.num_controls} controls)",
        )
    if len(bank.specs) < config.num_users:
        raise GeneratorError('users', f"Bank defines {len(bank.specs)} users, config asks for {config.num_users}")
    return bank.specs[:config.num_users]


def generate_streams(config: GeneratorConfig, bank: RoutineBank) -> List[ActionStream]:
    """Raw per-user streams sorted by (day, time), before windowing."""
    config.validate()
    start, end = config.dates()
    num_days = (end - start).days + 1
    return [_user_stream(spec, bank, start, num_days, config.seed) for spec in _select_specs(config, bank)]


def allocate_instances(available: List[int], target: int) -> List[int]:
    """Largest-remainder split of ``target`` across users in proportion to their window counts."""
    total = sum(available)
    exact = [target * a / total for a in available]
    quotas = [int(np.floor(x)) for x in exact]
    remainder = target - sum(quotas)
    ranked = sorted(range(len(available)), key=lambda i: (-(exact[i] - quotas[i]), i))
    for i in ranked[:remainder]:
        quotas[i] += 1
    return quotas


def generate(config: GeneratorConfig, bank: RoutineBank) -> SessionDataset:
    """
    Generate streams, cut stride-1 windows and trim to ``target_instances``.

    Each user keeps a prefix of its windows, so trimmed data still rebuilds
    into contiguous streams.

    Raises:
        GeneratorError: no windows at all, or fewer windows than the target
    """
    streams = generate_streams(config, bank)
    length = config.session_length
    available = [max(0, len(s) - length + 1) for s in streams]
    total = sum(available)
    if total == 0:
        raise GeneratorError('windowing', f"No user produced {length} actions; nothing to window")

    quotas = available
    if config.target_instances is not None:
        if total < config.target_instances:
            raise GeneratorError(
                'target_instances',
                f"Only {total} sessions available for target {config.target_instances}; widen the date range",
            )
        quotas = allocate_instances(available, config.target_instances)

    sessions = []
    for stream, quota in zip(streams, quotas):
        sessions.extend(window(stream, length, Schema.AN)[:quota])

    start, end = config.dates()
    dataset = SessionDataset(
        sessions=tuple(sessions), schema=Schema.AN, num_devices=bank.num_devices,
        num_controls=bank.num_controls, num_users=config.num_users, session_length=length,
        metadata={'year': start.year, 'start_date': start.isoformat(), 'end_date': end.isoformat(),
                  'seed': config.seed, 'generator': 'routine-bank'},
    )
    get_app_logger().log_data_operation(
        'generate', True,
        f"{len(sessions)} sessions from {sum(len(s) for s in streams)} actions of {len(streams)} users",
    )
    logger.debug("Window counts per user: %s", available)
    return dataset
