"""Small file helpers: atomic writes and CSV formatting."""

from __future__ import annotations

import json
import os
import tempfile
from pathlib import Path


def atomic_write_text(path: str | Path, text: str) -> None:
    """Write text to path via a temp file + rename so readers never see partial files."""
    path = Path(path)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=path.name + ".", suffix=".tmp")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def atomic_write_json(path: str | Path, obj) -> None:
    # insertion order is deterministic and, for embedded configs, semantic:
    # parameter order fixes chain column order, so keys must not be re-sorted
    atomic_write_text(path, json.dumps(obj, indent=2) + "\n")


def format_float(v: float) -> str:
    # repr round-trips exactly, which keeps re-runs bitwise identical
    return repr(float(v))


def csv_text(header: list[str], rows) -> str:
    lines = [",".join(header)]
    for row in rows:
        lines.append(",".join(format_float(v) if isinstance(v, float) else str(v) for v in row))
    return "\n".join(lines) + "\n"
