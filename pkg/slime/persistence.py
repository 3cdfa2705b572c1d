"""Atomic file output for JSON and CSV artifacts.

Artifacts are written to a temporary sibling file and renamed into place, so a
failed run never leaves a partial file behind.
"""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path
from typing import Any, Dict, Mapping

import pandas as pd


def atomic_write_text(path: Path, text: str) -> None:
    """Write ``text`` to ``path`` via write-then-rename."""

    path = Path(path)
    handle, temp_name = tempfile.mkstemp(
        prefix=f".{path.name}.", suffix=".tmp", dir=path.parent
    )
    try:
        with os.fdopen(handle, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(temp_name, path)
    except BaseException:
        if os.path.exists(temp_name):
            os.unlink(temp_name)
        raise


def write_json(path: Path, payload: Mapping[str, Any]) -> None:
    # sort_keys keeps repeated runs byte-identical
    atomic_write_text(path, json.dumps(payload, indent=2, sort_keys=True) + "\n")


def read_json(path: Path) -> Dict[str, Any]:
    with Path(path).open("r", encoding="utf-8") as f:
        return json.load(f)


def write_csv(
    path: Path, frame: pd.DataFrame, header_comments: Mapping[str, Any] | None = None
) -> None:
    """Write ``frame`` as CSV, optionally preceded by ``# key=value`` lines."""

    lines = []
    for key, value in (header_comments or {}).items():
        lines.append(f"# {key}={value}\n")
    body = frame.to_csv(index=False, lineterminator="\n")
    atomic_write_text(path, "".join(lines) + body)


__all__ = ["atomic_write_text", "read_json", "write_csv", "write_json"]
