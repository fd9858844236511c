"""Fixed-capacity bitmap index.  Bit 0 is the leftmost character / most significant bit."""

from __future__ import annotations

from dataclasses import dataclass
from enum import Enum
from typing import Iterable

from .errors import CapacityError


class Op(Enum):
    ADD = "add"
    DELETE = "delete"


@dataclass(frozen=True)
class Bitmap:
    bits: int
    capacity: int

    def __post_init__(self):
        if self.capacity < 1:
            raise ValueError("capacity must be positive")
        if self.bits < 0 or self.bits >> self.capacity:
            raise CapacityError("bits exceed capacity")

    @property
    def nbytes(self) -> int:
        return (self.capacity + 7) // 8

    def __contains__(self, file_id: int) -> bool:
        return 0 <= file_id < self.capacity and bool(self.bits >> (self.capacity - 1 - file_id) & 1)

    def __xor__(self, other: Bitmap) -> Bitmap:
        return bitmap_xor(self, other)

    def __str__(self) -> str:
        return format(self.bits, f"0{self.capacity}b")

    @classmethod
    def parse(cls, text: str) -> Bitmap:
        if not text or set(text) - {"0", "1"}:
            raise ValueError(f"not a bit string: {text!r}")
        return cls(int(text, 2), len(text))

    def to_bytes(self) -> bytes:
        pad = self.nbytes * 8 - self.capacity
        return (self.bits << pad).to_bytes(self.nbytes, "big")

    @classmethod
    def from_bytes(cls, data: bytes, capacity: int) -> Bitmap:
        if len(data) != (capacity + 7) // 8:
            raise ValueError("byte length does not match capacity")
        pad = len(data) * 8 - capacity
        return cls(int.from_bytes(data, "big") >> pad, capacity)


def bitmap_from_ids(ids: Iterable[int], capacity: int) -> Bitmap:
    bits = 0
    for i in ids:
        if not 0 <= i < capacity:
            raise CapacityError(f"file id {i} outside capacity {capacity}")
        bits |= 1 << (capacity - 1 - i)
    return Bitmap(bits, capacity)


def bitmap_update_string(op: Op, ids: Iterable[int], capacity: int) -> Bitmap:
    # XOR flips, so add and delete produce the same string
    return bitmap_from_ids(ids, capacity)


def bitmap_xor(a: Bitmap, b: Bitmap) -> Bitmap:
    if a.capacity != b.capacity:
        raise CapacityError("bitmap capacities differ")
    return Bitmap(a.bits ^ b.bits, a.capacity)


def bitmap_to_ids(b: Bitmap) -> list[int]:
    return [i for i, c in enumerate(str(b)) if c == "1"]
