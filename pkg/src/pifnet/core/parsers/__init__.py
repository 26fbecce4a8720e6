"""Parsers for pifnet input documents."""

from .config import (
    CHECK_NAMES,
    load_config,
    parse_config,
    serialize_config,
)

__all__ = [
    'CHECK_NAMES',
    'load_config',
    'parse_config',
    'serialize_config',
]
