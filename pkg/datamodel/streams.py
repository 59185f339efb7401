"""Per-user action streams and sliding-window session extraction."""
from dataclasses import dataclass
from typing import Dict, List, Optional, Sequence, Tuple

from datamodel.records import ActionRecord, Schema, Session, SessionDataset
from exceptions import InsufficientDataError
from utils.logging_utils import get_app_logger


@dataclass(frozen=True)
class ActionStream:
    """Time-ordered actions of one user."""
    user: Optional[int]
    actions: Tuple[ActionRecord, ...]

    def __len__(self) -> int:
        return len(self.actions)


def window(stream: ActionStream, length: int, schema: Schema = Schema.AN) -> List[Session]:
    """Stride-1 windows of ``length`` actions; consecutive windows overlap by length - 1."""
    actions = stream.actions
    return [
        Session(user=stream.user, actions=actions[start:start + length], schema=schema)
        for start in range(len(actions) - length + 1)
    ]


def rebuild_streams(dataset: SessionDataset) -> List[ActionStream]:
    """
    Recover streams from stride-1 sessions in file order.

    A session continues the current stream of its user when its first
    ``length - 1`` actions equal the stream's last ``length - 1``; otherwise a
    new stream starts.
    """
    overlap = dataset.session_length - 1
    open_streams: Dict[Optional[int], List[ActionRecord]] = {}
    finished: List[ActionStream] = []
    for session in dataset.sessions:
        current = open_streams.get(session.user)
        if current is not None and overlap and tuple(current[-overlap:]) == session.actions[:overlap]:
            current.append(session.actions[-1])
            continue
        if current is not None:
            finished.append(ActionStream(session.user, tuple(current)))
        open_streams[session.user] = list(session.actions)
    finished.extend(ActionStream(user, tuple(actions)) for user, actions in open_streams.items())
    finished.sort(key=lambda s: (-1 if s.user is None else s.user, s.actions[0].day, s.actions[0].time))
    return finished


def rewindow(streams: Sequence[ActionStream], length: int, template: SessionDataset) -> SessionDataset:
    """
    Cut every stream into windows of ``length`` actions (inputs plus one target).

    Raises:
        InsufficientDataError: no stream holds ``length`` actions
    """
    if length < 2:
        raise InsufficientDataError('rewindow', f"Window length must be >= 2, got {length}")
    longest = max((len(s) for s in streams), default=0)
    if longest < length:
        raise InsufficientDataError(
            'rewindow', f"Longest stream has {longest} actions; window of {length} needs more")
    sessions = [session for stream in streams for session in window(stream, length, template.schema)]
    get_app_logger().log_data_operation(
        'rewindow', True, f"{len(sessions)} sessions of length {length} from {len(streams)} streams")
    return template.with_sessions(sessions, session_length=length)
