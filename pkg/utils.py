"""
utils.py

Essential helpers for writing files, digests and logging setup.
"""
import hashlib
import json
import logging
import os
import sys
from typing import Any


def safe_write(path: str, content: str) -> None:
    """Write text file, creating directories if needed."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write(content)


def safe_write_bytes(path: str, content: bytes) -> None:
    """Write binary file, creating directories if needed."""
    os.makedirs(os.path.dirname(path) or ".", exist_ok=True)
    with open(path, "wb") as f:
        f.write(content)


def write_json(path: str, payload: Any) -> None:
    """Sorted-key JSON so reruns produce byte-identical files."""
    safe_write(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def file_digest(path: str) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as f:
        for chunk in iter(lambda: f.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def configure_logging(verbose: bool = False) -> None:
    """Diagnostics go to stderr; stdout is reserved for data."""
    logging.basicConfig(
        level=logging.DEBUG if verbose else logging.INFO,
        stream=sys.stderr,
        format="%(levelname)s %(name)s: %(message)s",
        force=True,
    )
