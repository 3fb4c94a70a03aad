"""Networked fusion service: wire protocol, config, simulator, pipeline, server, CLI."""

from .config import ConfigError, NamedPattern, ServiceConfig, load_config, load_patterns
from .pipeline import FusionPipeline
from .protocol import (
    MESSAGE_KINDS,
    MalformedMessage,
    Message,
    MissingField,
    UnknownKind,
    parse_message,
    serialize_message,
)
from .simulate import Injection, InvalidScript, ScenarioScript, generate_events, load_script

__all__ = [
    "ConfigError",
    "FusionPipeline",
    "Injection",
    "InvalidScript",
    "MESSAGE_KINDS",
    "MalformedMessage",
    "Message",
    "MissingField",
    "NamedPattern",
    "ScenarioScript",
    "ServiceConfig",
    "UnknownKind",
    "generate_events",
    "load_config",
    "load_patterns",
    "load_script",
    "parse_message",
    "serialize_message",
]
