"""Versioned model snapshot files.

Layout: one header line ``{"version": N}`` then one JSON record per line.
Writers emit records in sorted key order with fixed separators so equal
model state produces byte-identical files; writes go through a temp file
and rename.
"""

from __future__ import annotations

import json
import os
from pathlib import Path


class SnapshotError(Exception):
    pass


def dump_record(record: dict) -> str:
    return json.dumps(record, sort_keys=True, separators=(",", ":"), ensure_ascii=False)


def write_snapshot(path, version: int, records) -> None:
    path = Path(path)
    lines = [dump_record({"version": version})]
    lines.extend(dump_record(r) for r in records)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_text("\n".join(lines) + "\n", encoding="utf-8")
    os.replace(tmp, path)


def read_snapshot(path, expect_version: int) -> list[dict]:
    path = Path(path)
    lines = path.read_text("utf-8").splitlines()
    if not lines:
        raise SnapshotError(f"{path}: empty snapshot")
    header = json.loads(lines[0])
    version = header.get("version")
    if version != expect_version:
        raise SnapshotError(f"{path}: version {version}, expected {expect_version}")
    return [json.loads(line) for line in lines[1:] if line]
