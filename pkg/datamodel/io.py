"""Dataset files: JSON header line + one comma-separated row per action.

See docs/FORMATS.md. Sessions are consecutive blocks of ``session_length`` rows.
Row numbers in errors are 1-based file line numbers (the header is line 1).
"""
import json
from dataclasses import dataclass, field
from datetime import date
from pathlib import Path
from typing import Dict, List, Optional, Sequence, Tuple, Union

from datamodel.records import (
    DAYS_OF_WEEK, DAYS_OF_YEAR, SECONDS_PER_DAY, SESSION_LENGTH, SMARTSENSE_RANGE_SECONDS,
    SMARTSENSE_TIME_RANGES, ActionRecord, Schema, Session, SessionDataset,
)
from exceptions import RecordFormatError, RecordRangeError, SchemaError
from utils.logging_utils import get_app_logger
from utils.validation import parse_int_field

FILE_FORMAT = 'timing-matters-sessions'
FILE_VERSION = 1
AN_COLUMNS = ('day', 'time', 'device', 'user', 'control')
SMARTSENSE_COLUMNS = ('day', 'time', 'device', 'control', 'device_control')

PathLike = Union[str, Path]


@dataclass
class Vocabulary:
    """Name -> id dictionaries stored next to a dataset."""
    devices: Dict[str, int] = field(default_factory=dict)
    controls: Dict[str, int] = field(default_factory=dict)
    users: Dict[str, int] = field(default_factory=dict)
    control_device: Dict[int, int] = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            'devices': self.devices,
            'controls': self.controls,
            'users': self.users,
            'control_device': {str(k): v for k, v in sorted(self.control_device.items())},
        }

    @classmethod
    def from_dict(cls, data: dict) -> 'Vocabulary':
        return cls(
            devices={str(k): int(v) for k, v in data.get('devices', {}).items()},
            controls={str(k): int(v) for k, v in data.get('controls', {}).items()},
            users={str(k): int(v) for k, v in data.get('users', {}).items()},
            control_device={int(k): int(v) for k, v in data.get('control_device', {}).items()},
        )


def vocabulary_path(dataset_path: PathLike) -> Path:
    dataset_path = Path(dataset_path)
    return dataset_path.with_name(dataset_path.name + '.vocab.json')


def write_vocabulary(dataset_path: PathLike, vocab: Vocabulary) -> Path:
    path = vocabulary_path(dataset_path)
    path.write_text(json.dumps(vocab.to_dict(), indent=2, sort_keys=True) + '\n', encoding='utf-8')
    return path


def read_vocabulary(dataset_path: PathLike) -> Optional[Vocabulary]:
    path = vocabulary_path(dataset_path)
    if not path.exists():
        return None
    return Vocabulary.from_dict(json.loads(path.read_text(encoding='utf-8')))


# -- header -----------------------------------------------------------------------

def _header(dataset: SessionDataset) -> dict:
    header = {
        'format': FILE_FORMAT,
        'version': FILE_VERSION,
        'schema': dataset.schema.value,
        'session_length': dataset.session_length,
        'num_devices': dataset.num_devices,
        'num_controls': dataset.num_controls,
        'columns': list(AN_COLUMNS if dataset.schema is Schema.AN else SMARTSENSE_COLUMNS),
    }
    if dataset.num_users is not None:
        header['num_users'] = dataset.num_users
    if dataset.num_device_controls is not None:
        header['num_device_controls'] = dataset.num_device_controls
    if dataset.metadata:
        header['metadata'] = dataset.metadata
    return header


def _read_header(line: str, path: Path) -> dict:
    try:
        header = json.loads(line)
    except json.JSONDecodeError as e:
        raise RecordFormatError(1, f"{path}: header is not valid JSON ({e})") from e
    if not isinstance(header, dict) or header.get('format') != FILE_FORMAT:
        raise RecordFormatError(1, f"{path}: not a {FILE_FORMAT} file")
    if header.get('version') != FILE_VERSION:
        raise RecordFormatError(1, f"{path}: unsupported version {header.get('version')}")
    for key in ('schema', 'num_devices', 'num_controls'):
        if key not in header:
            raise RecordFormatError(1, f"{path}: header missing '{key}'")
    return header


def _read_lines(path: PathLike) -> Tuple[Path, List[str]]:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Dataset not found: {path}")
    lines = path.read_text(encoding='utf-8').splitlines()
    if not lines:
        raise RecordFormatError(1, f"{path}: empty file")
    return path, lines


def _split_row(line: str, row: int, width: int) -> List[str]:
    fields = line.split(',')
    if len(fields) != width:
        raise RecordFormatError(row, f"Row {row}: expected {width} columns, found {len(fields)}")
    return fields


# -- AN -------------------------------------------------------------------------------

def load_an(path: PathLike) -> SessionDataset:
    """
    Load an AN-style dataset (day-of-year, seconds, device, user, control).

    Raises:
        RecordFormatError: header problems, wrong column counts, mixed users in a
            session, or a row count that is not a multiple of the session length
        RecordRangeError: a field outside its range, or (day, time) decreasing
            inside a session
    """
    path, lines = _read_lines(path)
    header = _read_header(lines[0], path)
    if Schema.parse(header['schema']) is not Schema.AN:
        raise SchemaError('AN', header['schema'])

    length = int(header.get('session_length', SESSION_LENGTH))
    num_devices, num_controls = int(header['num_devices']), int(header['num_controls'])
    num_users = header.get('num_users')
    rows = lines[1:]
    if len(rows) % length:
        raise RecordFormatError(len(lines), f"{path}: {len(rows)} rows is not a multiple of session length {length}")

    sessions = []
    for start in range(0, len(rows), length):
        actions = []
        previous = None
        for offset in range(length):
            row = start + offset + 2
            day, time, device, user, control = _split_row(rows[start + offset], row, len(AN_COLUMNS))
            record = ActionRecord(
                day=parse_int_field(day, row, 'day', 0, DAYS_OF_YEAR),
                time=parse_int_field(time, row, 'time', 0, SECONDS_PER_DAY),
                device=parse_int_field(device, row, 'device', 0, num_devices),
                user=parse_int_field(user, row, 'user', 0, num_users),
                control=parse_int_field(control, row, 'control', 0, num_controls),
            )
            if actions and record.user != actions[0].user:
                raise RecordFormatError(row, f"Row {row}: user {record.user} differs from session user {actions[0].user}")
            key = (record.day, record.time)
            if previous is not None and key < previous:
                raise RecordRangeError(row, 'time', record.time, f"Row {row}: (day, time) {key} precedes {previous}")
            previous = key
            actions.append(record)
        sessions.append(Session(user=actions[0].user, actions=tuple(actions), schema=Schema.AN))

    dataset = SessionDataset(
        sessions=tuple(sessions), schema=Schema.AN, num_devices=num_devices, num_controls=num_controls,
        num_users=int(num_users) if num_users is not None else None, session_length=length,
        metadata=dict(header.get('metadata') or {}),
    )
    get_app_logger().log_data_operation('load_an', True, f"{path}: {len(sessions)} sessions, {len(rows)} actions")
    return dataset


def save_an(path: PathLike, dataset: SessionDataset) -> Path:
    """Write an AN dataset; load_an followed by save_an reproduces the file byte for byte."""
    if dataset.schema is not Schema.AN:
        raise SchemaError('AN', dataset.schema.value)
    lines = [json.dumps(_header(dataset), sort_keys=True, separators=(',', ':'))]
    for session in dataset.sessions:
        for a in session.actions:
            lines.append(f"{a.day},{a.time},{a.device},{a.user},{a.control}")
    return _write(path, lines)


# -- SmartSense ------------------------------------------------------------------------

def load_smartsense(path: PathLike) -> SessionDataset:
    """
    Load a SmartSense-style dataset (day-of-week, 3-hour range, device, control, device-control).

    The combined device-control column must map to one (device, control)
    pair consistently across the file.
    """
    path, lines = _read_lines(path)
    header = _read_header(lines[0], path)
    if Schema.parse(header['schema']) is not Schema.SMARTSENSE:
        raise SchemaError('SmartSense', header['schema'])

    length = int(header.get('session_length', SESSION_LENGTH))
    num_devices, num_controls = int(header['num_devices']), int(header['num_controls'])
    num_device_controls = header.get('num_device_controls')
    rows = lines[1:]
    if len(rows) % length:
        raise RecordFormatError(len(lines), f"{path}: {len(rows)} rows is not a multiple of session length {length}")

    pairs: Dict[int, Tuple[int, int]] = {}
    sessions = []
    for start in range(0, len(rows), length):
        actions = []
        for offset in range(length):
            row = start + offset + 2
            day, time, device, control, device_control = _split_row(rows[start + offset], row, len(SMARTSENSE_COLUMNS))
            record = ActionRecord(
                day=parse_int_field(day, row, 'day', 0, DAYS_OF_WEEK),
                time=parse_int_field(time, row, 'time', 0, SMARTSENSE_TIME_RANGES),
                device=parse_int_field(device, row, 'device', 0, num_devices),
                control=parse_int_field(control, row, 'control', 0, num_controls),
                device_control=parse_int_field(device_control, row, 'device_control', 0, num_device_controls),
            )
            pair = (record.device, record.control)
            known = pairs.setdefault(record.device_control, pair)
            if known != pair:
                raise RecordFormatError(row, f"Row {row}: device_control {record.device_control} maps to {pair}, "
                                             f"earlier rows map it to {known}")
            actions.append(record)
        sessions.append(Session(user=None, actions=tuple(actions), schema=Schema.SMARTSENSE))

    dataset = SessionDataset(
        sessions=tuple(sessions), schema=Schema.SMARTSENSE, num_devices=num_devices, num_controls=num_controls,
        num_device_controls=int(num_device_controls) if num_device_controls is not None else None,
        session_length=length, metadata=dict(header.get('metadata') or {}),
    )
    get_app_logger().log_data_operation('load_smartsense', True, f"{path}: {len(sessions)} sessions")
    return dataset


def save_smartsense(path: PathLike, dataset: SessionDataset) -> Path:
    if dataset.schema is not Schema.SMARTSENSE:
        raise SchemaError('SmartSense', dataset.schema.value)
    lines = [json.dumps(_header(dataset), sort_keys=True, separators=(',', ':'))]
    for session in dataset.sessions:
        for a in session.actions:
            lines.append(f"{a.day},{a.time},{a.device},{a.control},{a.device_control}")
    return _write(path, lines)


def load_dataset(path: PathLike) -> SessionDataset:
    """Dispatch on the header's schema tag."""
    path, lines = _read_lines(path)
    header = _read_header(lines[0], path)
    if Schema.parse(header['schema']) is Schema.AN:
        return load_an(path)
    return load_smartsense(path)


def to_smartsense(dataset: SessionDataset) -> SessionDataset:
    """
    Down-convert AN data to the SmartSense schema.

    Day-of-year becomes day-of-week (using metadata 'year' to find the weekday of
    day 0, Monday = 0, when present), seconds become the 3-hour range index and
    the combined device-control id is device * num_controls + control.
    """
    if dataset.schema is not Schema.AN:
        raise SchemaError('AN', dataset.schema.value)
    year = dataset.metadata.get('year')
    offset = date(int(year), 1, 1).weekday() if year else 0
    sessions = []
    for session in dataset.sessions:
        actions = tuple(
            ActionRecord(
                device=a.device, control=a.control,
                day=(a.day + offset) % DAYS_OF_WEEK,
                time=a.time // SMARTSENSE_RANGE_SECONDS,
                device_control=a.device * dataset.num_controls + a.control,
            )
            for a in session.actions
        )
        sessions.append(Session(user=None, actions=actions, schema=Schema.SMARTSENSE))
    return SessionDataset(
        sessions=tuple(sessions), schema=Schema.SMARTSENSE, num_devices=dataset.num_devices,
        num_controls=dataset.num_controls, num_device_controls=dataset.num_devices * dataset.num_controls,
        session_length=dataset.session_length, metadata=dict(dataset.metadata),
    )


def _write(path: PathLike, lines: Sequence[str]) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, 'w', encoding='utf-8', newline='\n') as fh:
        fh.write('\n'.join(lines) + '\n')
    return path
