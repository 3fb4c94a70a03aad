"""Service configuration and the named-pattern file.

Config is a YAML mapping; every key optional, unknown keys rejected.
Durations are integer milliseconds.  The pattern file holds one pattern
per line, ``name = pattern_text``, with # comments and blank lines ignored.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, fields
from pathlib import Path

import yaml

from ..ontology import Ontology
from ..patterns import parse_pattern

DAY_MS = 24 * 60 * 60 * 1000


class ConfigError(Exception):
    pass


@dataclass(frozen=True)
class ServiceConfig:
    host: str = "127.0.0.1"
    sensor_port: int = 7701
    console_port: int = 7702
    console_ws_port: int = 7703
    ontology_path: str | None = None  # packaged seed when unset
    pattern_path: str | None = None
    data_dir: str = "vigil-data"
    video_retention_ms: int = 30 * DAY_MS
    metadata_retention_ms: int = 365 * DAY_MS
    eta: float = 0.1
    alpha: float = 1.0
    board_cadence_ms: int = 5_000
    snapshot_interval_ms: int = 60_000
    operators: int = 1

    def __post_init__(self):
        for name in ("sensor_port", "console_port", "console_ws_port"):
            port = getattr(self, name)
            if not (1 <= port <= 65535):
                raise ConfigError(f"{name} {port} outside 1..65535")
        if self.video_retention_ms <= 0:
            raise ConfigError("video_retention_ms must be positive")
        if self.metadata_retention_ms < self.video_retention_ms:
            raise ConfigError("metadata_retention_ms must be >= video_retention_ms")
        if self.eta <= 0:
            raise ConfigError("eta must be positive")
        if self.alpha <= 0:
            raise ConfigError("alpha must be positive")
        if self.board_cadence_ms <= 0:
            raise ConfigError("board_cadence_ms must be positive")
        if self.snapshot_interval_ms <= 0:
            raise ConfigError("snapshot_interval_ms must be positive")
        if self.operators < 1:
            raise ConfigError("operators must be >= 1")


def load_config(path) -> ServiceConfig:
    try:
        raw = yaml.safe_load(Path(path).read_text("utf-8"))
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path}: {exc}") from exc
    if raw is None:
        raw = {}
    if not isinstance(raw, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    known = {f.name for f in fields(ServiceConfig)}
    unknown = sorted(set(raw) - known)
    if unknown:
        raise ConfigError(f"{path}: unknown keys {', '.join(unknown)}")
    try:
        return ServiceConfig(**raw)
    except TypeError as exc:
        raise ConfigError(f"{path}: {exc}") from exc


@dataclass(frozen=True)
class NamedPattern:
    name: str
    text: str


_NAME_RE = re.compile(r"[A-Za-z0-9_\-]+")


def parse_pattern_line(line: str) -> NamedPattern | None:
    """One ``name = pattern_text`` line; None for blanks and comments."""
    stripped = line.strip()
    if not stripped or stripped.startswith("#"):
        return None
    name, sep, text = stripped.partition("=")
    if not sep:
        raise ConfigError(f"expected 'name = pattern_text', got {line!r}")
    name = name.strip()
    text = text.strip()
    if not _NAME_RE.fullmatch(name):
        raise ConfigError(f"bad pattern name {name!r}")
    if not text:
        raise ConfigError(f"pattern {name!r} has empty text")
    return NamedPattern(name, text)


def load_patterns(path, ontology: Ontology) -> list[NamedPattern]:
    out: list[NamedPattern] = []
    seen: set[str] = set()
    for lineno, line in enumerate(Path(path).read_text("utf-8").splitlines(), start=1):
        try:
            named = parse_pattern_line(line)
        except ConfigError as exc:
            raise ConfigError(f"{path}:{lineno}: {exc}") from exc
        if named is None:
            continue
        if named.name in seen:
            raise ConfigError(f"{path}:{lineno}: duplicate pattern name {named.name!r}")
        seen.add(named.name)
        parse_pattern(named.text, ontology)  # fail fast on bad pattern text
        out.append(named)
    return out
