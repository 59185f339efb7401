"""Content hashing helpers for run manifests."""
import hashlib
from pathlib import Path
from typing import Union


def git_blob_hash(data: bytes) -> str:
    """Hash bytes the way git hashes a blob object (sha1 over 'blob <len>\\0' + data)."""
    header = f"blob {len(data)}\0".encode()
    return hashlib.sha1(header + data).hexdigest()


def file_content_hash(path: Union[str, Path]) -> str:
    """Git-style content hash of a file on disk."""
    return git_blob_hash(Path(path).read_bytes())
