"""Deterministic 64-bit hashing used for tokenization and seed derivation."""

_FNV_OFFSET = 0xCBF29CE484222325

# Stream tags keeping per-mode sampling seeds disjoint when derived from one
# master seed.
MODE_TAGS = {"model": 0x6D, "data": 0x64, "plain": 0x70}
_FNV_PRIME = 0x100000001B3
_MASK64 = (1 << 64) - 1


def fnv1a_64(data: bytes) -> int:
    """FNV-1a hash of a byte string as an unsigned 64-bit integer."""
    h = _FNV_OFFSET
    for byte in data:
        h ^= byte
        h = (h * _FNV_PRIME) & _MASK64
    return h


def text_hash(text: str) -> int:
    return fnv1a_64(text.encode("utf-8"))


def mix(*parts: int) -> int:
    """Fold integers into one deterministic 64-bit seed.

    Each part is encoded as 8 little-endian bytes (reduced mod 2**64, so
    negative inputs are accepted) and the concatenation is FNV-1a hashed.
    """
    buf = b"".join((p & _MASK64).to_bytes(8, "little") for p in parts)
    return fnv1a_64(buf)
