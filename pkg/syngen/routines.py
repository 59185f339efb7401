"""Routine bank: device/control vocabulary and per-user routine templates."""
from dataclasses import dataclass, field
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

import yaml

from datamodel.records import SECONDS_PER_DAY
from exceptions import ConfigurationError
from utils.validation import require_positive, require_probability

DAY_MASKS = {
    'daily': (0, 1, 2, 3, 4, 5, 6),
    'weekdays': (0, 1, 2, 3, 4),
    'weekends': (5, 6),
}


@dataclass(frozen=True)
class RoutineTemplate:
    """One habitual action: (device, control) around ``mean`` seconds with Gaussian jitter."""
    device: int
    control: int
    mean: float
    jitter: float
    days: Tuple[int, ...] = DAY_MASKS['daily']
    probability: float = 1.0

    def validate(self) -> None:
        if not 0 <= self.mean < SECONDS_PER_DAY:
            raise ConfigurationError('mean', f"Routine anchor {self.mean} outside [0, 86400)")
        require_positive(self.jitter, 'jitter', allow_zero=True)
        require_probability(self.probability, 'probability')
        if not self.days or any(d not in range(7) for d in self.days):
            raise ConfigurationError('days', f"Day-of-week mask must use 0..6, got {self.days}")


@dataclass(frozen=True)
class RoutineSpec:
    """A user's routines plus the expected number of random background actions per day."""
    user: int
    routines: Tuple[RoutineTemplate, ...] = ()
    noise_rate: float = 0.0

    def validate(self) -> None:
        require_positive(self.noise_rate, 'noise_rate', allow_zero=True)
        for routine in self.routines:
            routine.validate()


@dataclass
class RoutineBank:
    """Vocabulary shared by all users and their routine specs."""
    devices: List[str]
    controls: List[str]
    control_device: List[int]
    specs: List[RoutineSpec] = field(default_factory=list)

    @property
    def num_devices(self) -> int:
        return len(self.devices)

    @property
    def num_controls(self) -> int:
        return len(self.controls)

    def controls_of(self, device: int) -> List[int]:
        return [c for c, owner in enumerate(self.control_device) if owner == device]

    def vocabulary(self):
        from datamodel.io import Vocabulary

        return Vocabulary(
            devices={name: i for i, name in enumerate(self.devices)},
            controls={name: i for i, name in enumerate(self.controls)},
            users={f"user_{spec.user:02d}": spec.user for spec in self.specs},
            control_device=dict(enumerate(self.control_device)),
        )


def parse_clock(value: Union[str, int, float], key: str = 'mean') -> float:
    """Accept seconds after midnight or an 'HH:MM[:SS]' string."""
    if isinstance(value, (int, float)):
        return float(value)
    try:
        parts = [int(p) for p in str(value).split(':')]
    except ValueError:
        raise ConfigurationError(key, f"Cannot parse time of day {value!r}")
    if len(parts) not in (2, 3):
        raise ConfigurationError(key, f"Time of day must be HH:MM or HH:MM:SS, got {value!r}")
    hours, minutes = parts[0], parts[1]
    seconds = parts[2] if len(parts) == 3 else 0
    return float(hours * 3600 + minutes * 60 + seconds)


def _parse_days(value) -> Tuple[int, ...]:
    if value is None:
        return DAY_MASKS['daily']
    if isinstance(value, str):
        if value not in DAY_MASKS:
            raise ConfigurationError('days', f"Unknown day mask '{value}'. Valid: {', '.join(DAY_MASKS)}")
        return DAY_MASKS[value]
    return tuple(sorted(int(d) for d in value))


def _build_vocabulary(raw_devices: Sequence[dict]) -> Tuple[List[str], List[str], List[int], Dict[Tuple[str, str], int]]:
    devices, controls, owners = [], [], []
    lookup: Dict[Tuple[str, str], int] = {}
    for device_id, entry in enumerate(raw_devices):
        name = str(entry['name'])
        devices.append(name)
        for control in entry.get('controls') or []:
            lookup[(name, str(control))] = len(controls)
            controls.append(f"{name}.{control}")
            owners.append(device_id)
    if len(set(devices)) != len(devices):
        raise ConfigurationError('devices', "Device names must be unique")
    return devices, controls, owners, lookup


def load_routine_bank(path: Union[str, Path, None] = None) -> RoutineBank:
    """
    Read a routine bank YAML file (schema in docs/FORMATS.md).

    Raises:
        ConfigurationError: missing file, unknown device/control names or
            invalid routine values
    """
    from config import DEFAULT_ROUTINE_BANK

    path = Path(path) if path else DEFAULT_ROUTINE_BANK
    if not path.exists():
        raise ConfigurationError('routines', f"Routine bank not found: {path}")
    with open(path, 'r', encoding='utf-8') as fh:
        raw = yaml.safe_load(fh) or {}

    devices, controls, owners, lookup = _build_vocabulary(raw.get('devices') or [])
    specs = []
    for position, entry in enumerate(raw.get('users') or []):
        routines = []
        for item in entry.get('routines') or []:
            key = (str(item['device']), str(item['control']))
            if key not in lookup:
                raise ConfigurationError('routines', f"User {position}: unknown device/control {key}")
            control = lookup[key]
            routines.append(RoutineTemplate(
                device=owners[control],
                control=control,
                mean=parse_clock(item['mean']),
                jitter=float(item.get('jitter', 600)),
                days=_parse_days(item.get('days')),
                probability=float(item.get('probability', 1.0)),
            ))
        spec = RoutineSpec(user=int(entry.get('user', position)), routines=tuple(routines),
                           noise_rate=float(entry.get('noise_rate', 0.0)))
        spec.validate()
        specs.append(spec)
    return RoutineBank(devices=devices, controls=controls, control_device=owners, specs=specs)


def degenerate_bank(bank: RoutineBank, num_users: int, noise_rate: Optional[float] = 0.0) -> RoutineBank:
    """Same vocabulary, ``num_users`` users without routines (``--routines none``)."""
    specs = [RoutineSpec(user=u, routines=(), noise_rate=noise_rate or 0.0) for u in range(num_users)]
    return RoutineBank(devices=list(bank.devices), controls=list(bank.controls),
                       control_device=list(bank.control_device), specs=specs)
