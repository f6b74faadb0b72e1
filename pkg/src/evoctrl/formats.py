"""Stable on-disk formats shared by the CLI and downstream tooling.

CSV files start with a ``#``-prefixed metadata block (``# key: value`` per
line, echoing the fully-resolved configuration), followed by one header row
and the data rows.  Floats are rendered with ``repr``, so every numeric field
survives a parse round trip exactly.  Identical invocations produce
byte-identical files: nothing time- or host-dependent is ever written.
"""

from __future__ import annotations

import json
import math
import sys
from typing import IO, Iterable


def format_value(value) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _emit_csv(out: IO[str], metadata: dict, header: list[str],
              rows: Iterable[Iterable]) -> None:
    for key, value in metadata.items():
        out.write(f"# {key}: {format_value(value)}\n")
    out.write(",".join(header) + "\n")
    for row in rows:
        out.write(",".join(format_value(v) for v in row) + "\n")


def write_csv(path: str, metadata: dict, header: list[str],
              rows: Iterable[Iterable]) -> None:
    """Write a complete metadata-prefixed CSV to ``path`` (``-`` = stdout)."""
    if path == "-":
        _emit_csv(sys.stdout, metadata, header, rows)
        return
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        _emit_csv(out, metadata, header, rows)


class IncrementalCsvWriter:
    """Streams rows to disk as they arrive, flushing after each one.

    Interrupting the process leaves a prefix of complete rows behind, which
    is exactly what resumable consumers expect.
    """

    def __init__(self, path: str, metadata: dict, header: list[str]):
        self._file = open(path, "w", encoding="utf-8", newline="\n")
        for key, value in metadata.items():
            self._file.write(f"# {key}: {format_value(value)}\n")
        self._file.write(",".join(header) + "\n")
        self._file.flush()

    def write_row(self, row: Iterable) -> None:
        self._file.write(",".join(format_value(v) for v in row) + "\n")
        self._file.flush()

    def close(self) -> None:
        self._file.close()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()


def read_csv(path: str) -> tuple[dict[str, str], list[str], list[list[str]]]:
    """Parse a metadata-prefixed CSV into (metadata, header, rows of strings).

    A trailing row with the wrong field count (an interrupted write) is
    dropped rather than rejected.
    """
    metadata: dict[str, str] = {}
    header: list[str] = []
    rows: list[list[str]] = []
    with open(path, "r", encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("#"):
                body = line[1:].strip()
                if ":" in body:
                    key, value = body.split(":", 1)
                    metadata[key.strip()] = value.strip()
                continue
            if not header:
                header = line.split(",")
                continue
            rows.append(line.split(","))
    if rows and header and len(rows[-1]) != len(header):
        rows.pop()
    return metadata, header, rows


def write_jsonl(path: str, records: Iterable[dict]) -> None:
    """One compact JSON object per line; NaN becomes null."""
    def clean(obj):
        return {k: (None if isinstance(v, float) and math.isnan(v) else v)
                for k, v in obj.items()}

    if path == "-":
        for rec in records:
            sys.stdout.write(json.dumps(clean(rec), separators=(",", ":")) + "\n")
        return
    with open(path, "w", encoding="utf-8", newline="\n") as out:
        for rec in records:
            out.write(json.dumps(clean(rec), separators=(",", ":")) + "\n")
