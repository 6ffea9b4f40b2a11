"""File plumbing: atomic writes, JSON/JSONL helpers, streaming array reader.

Outputs are written to a temp name in the target directory and renamed into
place, so a crashed run never leaves a partial file behind.
"""

from __future__ import annotations

import json
import os
from pathlib import Path
from typing import Any, Iterable, Iterator


def atomic_write_text(path: str | Path, text: str) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_name(f".{path.name}.tmp-{os.getpid()}")
    tmp.write_text(text, encoding="utf-8")
    os.replace(tmp, path)


def write_json_atomic(path: str | Path, obj: Any) -> None:
    atomic_write_text(path, json.dumps(obj, ensure_ascii=False, indent=2))


def write_jsonl_atomic(path: str | Path, rows: Iterable[dict[str, Any]]) -> None:
    lines = [json.dumps(row, ensure_ascii=False) for row in rows]
    atomic_write_text(path, "\n".join(lines) + ("\n" if lines else ""))


def read_jsonl(path: str | Path) -> Iterator[dict[str, Any]]:
    """Yield one object per non-blank line; malformed lines raise with context."""
    with open(path, "r", encoding="utf-8") as fh:
        for lineno, line in enumerate(fh, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                yield json.loads(line)
            except json.JSONDecodeError as exc:
                raise ValueError(f"{path}:{lineno}: invalid JSON line: {exc}") from exc


def iter_json_array(path: str | Path, chunk_size: int = 1 << 16) -> Iterator[Any]:
    """Stream elements of a top-level JSON array without loading the file.

    Works on arbitrarily large arrays; elements themselves must fit in memory.
    """
    decoder = json.JSONDecoder()
    with open(path, "r", encoding="utf-8") as fh:
        buf = ""
        pos = 0
        seen_open = False
        eof = False
        while True:
            # Skip separators; refill the buffer when it runs dry.
            while True:
                while pos < len(buf) and (buf[pos] in " \t\r\n,"):
                    pos += 1
                if pos < len(buf):
                    break
                if eof:
                    raise ValueError(f"{path}: truncated JSON array")
                chunk = fh.read(chunk_size)
                if not chunk:
                    eof = True
                buf, pos = buf[pos:] + chunk, 0

            ch = buf[pos]
            if not seen_open:
                if ch != "[":
                    raise ValueError(f"{path}: expected a top-level JSON array")
                seen_open = True
                pos += 1
                continue
            if ch == "]":
                return
            try:
                obj, end = decoder.raw_decode(buf, pos)
            except json.JSONDecodeError:
                if eof:
                    raise ValueError(f"{path}: truncated JSON array") from None
                # Element spans the chunk boundary; read more and retry.
                chunk = fh.read(chunk_size)
                if not chunk:
                    eof = True
                buf, pos = buf[pos:] + chunk, 0
                continue
            pos = end
            yield obj


def load_json(path: str | Path) -> Any:
    with open(path, "r", encoding="utf-8") as fh:
        return json.load(fh)
