"""Seeded, portable pseudo-random generator.

All randomness in the kit flows through :class:`Sha256Counter`, a counter-mode
generator over SHA-256: block ``i`` of the stream is ``SHA256(seed || i)``
with ``i`` as an 8-byte big-endian counter.  The construction is fixed so two
implementations fed the same seed produce identical shuffles, placements and
delays on any platform.
"""

from __future__ import annotations

import hashlib

from .errors import InvalidInputError


class Sha256Counter:
    """Deterministic byte/integer stream keyed by an arbitrary seed."""

    def __init__(self, seed: bytes):
        if not isinstance(seed, bytes):
            raise InvalidInputError("seed must be bytes")
        self._seed = seed
        self._counter = 0
        self._buf = b""
        self._pos = 0

    def _refill(self) -> None:
        self._buf = hashlib.sha256(
            self._seed + self._counter.to_bytes(8, "big")
        ).digest()
        self._counter += 1
        self._pos = 0

    def bytes(self, n: int) -> bytes:
        pos = self._pos
        if n <= len(self._buf) - pos:
            self._pos = pos + n
            return self._buf[pos : pos + n]
        out = bytearray()
        while len(out) < n:
            if self._pos >= len(self._buf):
                self._refill()
            take = min(n - len(out), len(self._buf) - self._pos)
            out += self._buf[self._pos : self._pos + take]
            self._pos += take
        return bytes(out)

    def u64(self) -> int:
        return int.from_bytes(self.bytes(8), "big")

    def randbelow(self, n: int) -> int:
        """Uniform integer in [0, n) via rejection sampling (no modulo bias)."""
        if n <= 0:
            raise InvalidInputError("randbelow requires n >= 1")
        if n == 1:
            return 0
        limit = (1 << 64) - ((1 << 64) % n)
        while True:
            x = self.u64()
            if x < limit:
                return x % n

    def uniform(self) -> float:
        """Float in [0, 1) with 53 bits of precision."""
        return (self.u64() >> 11) / float(1 << 53)


def derive_seed(*parts: bytes | int | str) -> bytes:
    """Hash heterogeneous parts into a 32-byte sub-seed."""
    h = hashlib.sha256()
    for p in parts:
        if isinstance(p, int):
            p = p.to_bytes(8, "big", signed=False)
        elif isinstance(p, str):
            p = p.encode()
        h.update(len(p).to_bytes(4, "big"))
        h.update(p)
    return h.digest()
