"""Parameter checkpoint files.

Format (version 1): a NumPy ``.npz`` archive. Each parameter or buffer is stored
under ``param::<name>`` as a float64 array; ``__meta__`` holds a JSON document
with ``format``, ``version``, caller metadata and a SHA-256 ``digest`` over the
sorted names, shapes and raw little-endian values. Loading recomputes the digest.
"""
import hashlib
import json
import zipfile
from pathlib import Path
from typing import Dict, Tuple, Union

import numpy as np

from exceptions import CheckpointIntegrityError

CHECKPOINT_FORMAT = 'timing-matters-checkpoint'
CHECKPOINT_VERSION = 1
_PREFIX = 'param::'


def state_digest(state: Dict[str, np.ndarray]) -> str:
    digest = hashlib.sha256()
    for name in sorted(state):
        values = np.ascontiguousarray(state[name], dtype='<f8')
        digest.update(name.encode('utf-8'))
        digest.update(repr(tuple(values.shape)).encode('ascii'))
        digest.update(values.tobytes())
    return digest.hexdigest()


def save_checkpoint(path: Union[str, Path], state: Dict[str, np.ndarray], meta: dict) -> str:
    """Write ``state`` and ``meta``; returns the digest."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    digest = state_digest(state)
    document = dict(meta, format=CHECKPOINT_FORMAT, version=CHECKPOINT_VERSION, digest=digest)
    arrays = {f"{_PREFIX}{name}": np.asarray(values, dtype='<f8') for name, values in state.items()}
    arrays['__meta__'] = np.array(json.dumps(document, sort_keys=True))
    with open(path, 'wb') as fh:
        np.savez(fh, **arrays)
    return digest


def load_checkpoint(path: Union[str, Path]) -> Tuple[Dict[str, np.ndarray], dict]:
    """
    Read a checkpoint and verify its digest.

    Raises:
        CheckpointIntegrityError: missing file, unreadable archive, wrong
            format/version, or digest mismatch
    """
    path = Path(path)
    if not path.exists():
        raise CheckpointIntegrityError(path, f"Checkpoint not found: {path}")
    try:
        with np.load(path, allow_pickle=False) as archive:
            meta = json.loads(str(archive['__meta__']))
            state = {key[len(_PREFIX):]: archive[key].astype(np.float64)
                     for key in archive.files if key.startswith(_PREFIX)}
    except (OSError, ValueError, KeyError, EOFError, zipfile.BadZipFile, json.JSONDecodeError) as e:
        raise CheckpointIntegrityError(path, f"Unreadable checkpoint {path}: {e}") from e

    if meta.get('format') != CHECKPOINT_FORMAT or meta.get('version') != CHECKPOINT_VERSION:
        raise CheckpointIntegrityError(path, f"Unsupported checkpoint format in {path}: "
                                             f"{meta.get('format')} v{meta.get('version')}")
    if state_digest(state) != meta.get('digest'):
        raise CheckpointIntegrityError(path, f"Digest mismatch for {path}")
    return state, meta
