"""Deterministic hashes used for canvas digests and mock color derivation.

Canvas content digests are the first 8 bytes of SHA-256, hex encoded: fast
in every language this system talks to (Python, browser crypto.subtle,
node). FNV-1a-64 is kept separate because the mock backends derive colors
from it and independent implementations must agree bit for bit.
"""

from __future__ import annotations

import hashlib

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a64(data: bytes | str) -> int:
    if isinstance(data, str):
        data = data.encode("utf-8")
    h = FNV_OFFSET
    for b in data:
        h ^= b
        h = (h * FNV_PRIME) & _MASK64
    return h


def fnv_color(text: str) -> tuple[int, int, int]:
    """Low 24 bits of FNV-1a-64(text), split big-endian into (r, g, b)."""
    v = fnv1a64(text) & 0xFFFFFF
    return (v >> 16) & 0xFF, (v >> 8) & 0xFF, v & 0xFF


def content_digest(data: bytes) -> str:
    """64-bit content digest as 16 hex chars."""
    return hashlib.sha256(data).hexdigest()[:16]
