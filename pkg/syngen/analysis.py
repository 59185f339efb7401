"""Dataset analysis tables: consecutive time differences and device frequency."""
from typing import Iterable, Optional, Sequence

import numpy as np
import pandas as pd

from datamodel.records import Schema, Session

DEFAULT_DIFF_EDGES = (0, 1, 60, 300, 900, 1800, 3600, 10800, 21600, 43200, 86400)


def _format_seconds(value: float) -> str:
    if value >= 3600:
        return f"{value / 3600:g}h"
    if value >= 60:
        return f"{value / 60:g}m"
    return f"{value:g}s"


def bucket_labels(edges: Sequence[float]) -> list:
    labels = [f"[{_format_seconds(lo)},{_format_seconds(hi)})" for lo, hi in zip(edges[:-1], edges[1:])]
    labels.append(f"[{_format_seconds(edges[-1])},inf)")
    return labels


def consecutive_diffs(sessions: Iterable[Session]) -> np.ndarray:
    """Seconds between each pair of consecutive actions in every session."""
    diffs = []
    for session in sessions:
        seconds = np.array([a.absolute_seconds(session.schema) for a in session.actions], dtype=np.float64)
        diffs.append(np.diff(seconds))
    return np.concatenate(diffs) if diffs else np.zeros(0)


def analyze_time_diffs(sessions: Iterable[Session], edges: Sequence[float] = DEFAULT_DIFF_EDGES) -> pd.DataFrame:
    """
    Histogram of consecutive action time differences.

    Buckets are [edge_i, edge_i+1) plus an open last bucket. Empty input gives
    all-zero counts.

    Returns:
        DataFrame with columns bucket, lower, upper, count, share
    """
    edges = np.asarray(edges, dtype=np.float64)
    diffs = consecutive_diffs(sessions)
    index = np.searchsorted(edges, diffs, side='right') - 1
    counts = np.bincount(index[index >= 0], minlength=len(edges))[:len(edges)]
    total = counts.sum()
    return pd.DataFrame({
        'bucket': bucket_labels(edges),
        'lower': edges,
        'upper': np.append(edges[1:], np.inf),
        'count': counts.astype(np.int64),
        'share': counts / total if total else np.zeros(len(edges)),
    })


def device_position_counts(sessions: Iterable[Session]) -> pd.DataFrame:
    """Device x session-position count matrix with a 'total' column."""
    sessions = list(sessions)
    if not sessions:
        return pd.DataFrame(columns=['total'])
    length = max(len(s) for s in sessions)
    rows = [(a.device, position) for s in sessions for position, a in enumerate(s.actions)]
    frame = pd.DataFrame(rows, columns=['device', 'position'])
    matrix = pd.crosstab(frame['device'], frame['position']).reindex(columns=range(length), fill_value=0)
    matrix.columns = [f"pos_{p}" for p in matrix.columns]
    matrix['total'] = matrix.sum(axis=1)
    return matrix


def analyze_device_frequency(sessions: Iterable[Session], top: Optional[int] = 2) -> pd.DataFrame:
    """
    Per-position counts of the most frequent devices, ready for a heatmap.

    Args:
        sessions: Sessions to count
        top: Keep the ``top`` devices by total count (None keeps all)

    Returns:
        DataFrame indexed by device id, columns pos_0..pos_{n-1} and total,
        sorted by total descending (ties by device id)
    """
    matrix = device_position_counts(sessions)
    if matrix.empty:
        return matrix
    matrix = matrix.reset_index().sort_values(['total', 'device'], ascending=[False, True]).set_index('device')
    return matrix if top is None else matrix.head(top)


def top_device_share(sessions: Iterable[Session], top: int = 2) -> float:
    """Fraction of all actions performed on the ``top`` most frequent devices."""
    matrix = device_position_counts(sessions)
    if matrix.empty:
        return 0.0
    totals = matrix['total'].sort_values(ascending=False)
    return float(totals.head(top).sum() / totals.sum())


def summary(sessions: Sequence[Session]) -> pd.DataFrame:
    """One-row dataset statistics (sessions, users, observed devices and controls)."""
    actions = [a for s in sessions for a in s.actions]
    users = {s.user for s in sessions if s.user is not None}
    schema = sessions[0].schema.value if sessions else Schema.AN.value
    return pd.DataFrame([{
        'schema': schema,
        'sessions': len(sessions),
        'actions': len(actions),
        'users': len(users),
        'devices': len({a.device for a in actions}),
        'controls': len({a.control for a in actions}),
    }])
