"""XOR additive homomorphic encryption with state-interval bookkeeping.

A ciphertext at state i is ``m ^ P(i) ^ P(i-1)`` where ``P(i)`` is the PRF
pad for state i.  XOR-ing ciphertexts of adjacent states telescopes the
interior pads away, so a fold covering states ``base..cur`` decrypts with
``P(cur) ^ P(base-1)``.  The ciphertext carries that interval explicitly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass

from .crypto import prf_expand
from .errors import StateError

_HEADER = struct.Struct(">QQI")


@dataclass(frozen=True)
class StatefulCiphertext:
    body: bytes
    base: int
    cur: int

    def __post_init__(self):
        if not 1 <= self.base <= self.cur:
            raise ValueError(f"bad state interval [{self.base}, {self.cur}]")

    def to_bytes(self) -> bytes:
        return _HEADER.pack(self.base, self.cur, len(self.body)) + self.body

    @classmethod
    def from_bytes(cls, data: bytes) -> StatefulCiphertext:
        ct, rest = cls.read(data)
        if rest:
            raise ValueError("trailing bytes after ciphertext")
        return ct

    @classmethod
    def read(cls, data: bytes) -> tuple[StatefulCiphertext, bytes]:
        """Parse one ciphertext from the front of ``data``; return it and the remainder."""
        if len(data) < _HEADER.size:
            raise ValueError("truncated ciphertext header")
        base, cur, n = _HEADER.unpack_from(data)
        end = _HEADER.size + n
        if len(data) < end:
            raise ValueError("truncated ciphertext body")
        return cls(bytes(data[_HEADER.size:end]), base, cur), data[end:]


def _pad(key: bytes, state: int, nbytes: int) -> int:
    return int.from_bytes(prf_expand(key, state.to_bytes(8, "big"), nbytes), "big")


def _xor(body: bytes, mask: int) -> bytes:
    return (int.from_bytes(body, "big") ^ mask).to_bytes(len(body), "big")


def ashe_encrypt(key: bytes, m: bytes, state: int) -> StatefulCiphertext:
    if state < 1:
        raise ValueError("state must be >= 1")
    n = len(m)
    body = _xor(m, _pad(key, state, n) ^ _pad(key, state - 1, n))
    return StatefulCiphertext(body, state, state)


def ashe_decrypt(key: bytes, ct: StatefulCiphertext) -> bytes:
    n = len(ct.body)
    return _xor(ct.body, _pad(key, ct.cur, n) ^ _pad(key, ct.base - 1, n))


def ashe_add(older: StatefulCiphertext, newer: StatefulCiphertext) -> StatefulCiphertext:
    if newer.base != older.cur + 1:
        raise StateError(f"non-adjacent intervals: ..{older.cur} then {newer.base}..")
    if len(older.body) != len(newer.body):
        raise ValueError("ciphertext lengths differ")
    mask = int.from_bytes(newer.body, "big")
    return StatefulCiphertext(_xor(older.body, mask), older.base, newer.cur)
