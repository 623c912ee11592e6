"""Canonical JSON encoding, checksums, and state digests.

Every persisted or checksummed structure goes through the same canonical
byte form so that digests are stable across processes and replays.
"""
from __future__ import annotations

import hashlib
import json
import zlib
from typing import Any


def canonical_bytes(obj: Any) -> bytes:
    """Serialize to the canonical byte form: sorted keys, no whitespace, UTF-8."""
    return json.dumps(obj, sort_keys=True, separators=(",", ":"), ensure_ascii=False).encode("utf-8")


def crc32_hex(payload: bytes) -> str:
    return format(zlib.crc32(payload) & 0xFFFFFFFF, "08x")


def sha256_hex(payload: bytes) -> str:
    return hashlib.sha256(payload).hexdigest()


def digest(obj: Any) -> str:
    """Hex digest of an object's canonical byte form."""
    return sha256_hex(canonical_bytes(obj))
