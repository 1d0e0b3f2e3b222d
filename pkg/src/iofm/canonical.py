"""Deterministic JSON serialization and checksums.

Top-level key order of records and envelopes is fixed by their owners; every
nested mapping is emitted with sorted keys so that equal values always produce
equal bytes.
"""

import hashlib
import json


def normalize(value):
    """Recursively convert mappings to key-sorted dicts and tuples/sets to lists."""
    if isinstance(value, dict):
        return {k: normalize(value[k]) for k in sorted(value)}
    if isinstance(value, (list, tuple)):
        return [normalize(v) for v in value]
    if isinstance(value, (set, frozenset)):
        items = [normalize(v) for v in value]
        return sorted(items, key=dumps)
    return value


def normalize_top(mapping: dict) -> dict:
    """Keep the key order of ``mapping`` but normalize every value."""
    return {k: normalize(v) for k, v in mapping.items()}


def dumps(value) -> str:
    """Compact JSON with sorted keys at every level."""
    return json.dumps(value, sort_keys=True, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def dumps_ordered(value) -> str:
    """Compact JSON preserving the insertion order of ``value`` itself."""
    return json.dumps(value, separators=(",", ":"), ensure_ascii=False, allow_nan=False)


def checksum(text: str) -> str:
    return hashlib.sha256(text.encode("utf-8")).hexdigest()


def digest(value) -> str:
    return checksum(dumps(normalize(value)))
