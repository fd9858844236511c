"""Complete-subtree group key distribution over a heap-numbered binary tree.

Node 1 is the root and node i has children 2i and 2i+1.  Clients occupy the
leaves left to right in registration order; leaves beyond the client count
stay unassigned.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field
from typing import Iterable, Optional, Sequence

from .crypto import encode, prf, prf_expand, random_key
from .errors import IntegrityError, StateError

_ENTRY_ID = struct.Struct(">I")


@dataclass(frozen=True)
class PathKey:
    entries: tuple[tuple[int, bytes], ...]

    @property
    def node_ids(self) -> list[int]:
        return [n for n, _ in self.entries]

    def to_bytes(self) -> bytes:
        out = bytearray(len(self.entries).to_bytes(2, "big"))
        for node, key in self.entries:
            out += _ENTRY_ID.pack(node) + key
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> PathKey:
        if len(data) < 2:
            raise IntegrityError("path key too short")
        count = int.from_bytes(data[:2], "big")
        body = len(data) - 2
        if count == 0 or body % count:
            raise IntegrityError("path key length does not match entry count")
        stride = body // count
        if stride < 4 + 16:
            raise IntegrityError("path key entries too short")
        entries = []
        for i in range(count):
            off = 2 + i * stride
            (node,) = _ENTRY_ID.unpack_from(data, off)
            entries.append((node, bytes(data[off + 4:off + stride])))
        pk = cls(tuple(entries))
        pk.validate()
        return pk

    def validate(self) -> None:
        ids = self.node_ids
        if not ids or ids[0] != 1:
            raise IntegrityError("path key must start at the root")
        for parent, child in zip(ids, ids[1:]):
            if child // 2 != parent:
                raise IntegrityError(f"node {child} is not a child of {parent}")


@dataclass(frozen=True)
class PathKeyToken:
    label: bytes
    mask_output: bytes


@dataclass
class KeyTree:
    height: int
    node_keys: dict[int, bytes]
    leaf_of: dict[str, int]
    clients: list[str] = field(default_factory=list)

    @property
    def leaf_count(self) -> int:
        return 1 << self.height

    def path_nodes(self, client: str) -> list[int]:
        try:
            node = self.leaf_of[client]
        except KeyError:
            raise StateError(f"unknown client {client!r}") from None
        nodes = []
        while node:
            nodes.append(node)
            node //= 2
        return nodes[::-1]

    def leaves_under(self, node: int) -> range:
        depth = node.bit_length() - 1
        span = 1 << (self.height - depth)
        first = node * span
        return range(first, first + span)


def node_key(master: bytes, node: int) -> bytes:
    return prf(master, encode("node", node))


def tree_build(master: bytes, clients: Sequence[str]) -> KeyTree:
    if not clients:
        raise ValueError("at least one client is required")
    if len(set(clients)) != len(clients):
        raise ValueError("duplicate client ids")
    height = (len(clients) - 1).bit_length()
    leaves = 1 << height
    keys = {v: node_key(master, v) for v in range(1, 2 * leaves)}
    leaf_of = {c: leaves + i for i, c in enumerate(clients)}
    return KeyTree(height, keys, leaf_of, list(clients))


def path_key(tree: KeyTree, client: str) -> PathKey:
    return PathKey(tuple((v, tree.node_keys[v]) for v in tree.path_nodes(client)))


def make_path_token(pk: PathKey, k_id: bytes, rng=None) -> PathKeyToken:
    label = random_key(rng, len(k_id))
    raw = pk.to_bytes()
    mask = prf_expand(k_id, label, len(raw))
    return PathKeyToken(label, bytes(a ^ b for a, b in zip(raw, mask)))


def recover_path_key(token: PathKeyToken, k_id: bytes) -> PathKey:
    mask = prf_expand(k_id, token.label, len(token.mask_output))
    return PathKey.from_bytes(bytes(a ^ b for a, b in zip(token.mask_output, mask)))


def roots_subtrees(tree: KeyTree, authorized: Iterable[str]) -> set[int]:
    """Minimal set of subtree roots whose leaves are exactly the authorized clients."""
    nodes = set()
    for c in authorized:
        if c not in tree.leaf_of:
            raise StateError(f"unknown client {c!r}")
        nodes.add(tree.leaf_of[c])
    if not nodes:
        raise ValueError("authorized set is empty")
    level = sorted(nodes)
    for _ in range(tree.height):
        merged = set()
        for n in level:
            if n ^ 1 in nodes and n & 1 == 0:
                merged.add(n)
        for n in merged:
            nodes.difference_update((n, n + 1))
            nodes.add(n // 2)
        level = sorted(n // 2 for n in merged)
    return nodes


def common_cover_key(pk: PathKey, cover: Iterable[int]) -> Optional[tuple[int, bytes]]:
    cover = set(cover)
    for node, key in pk.entries:
        if node in cover:
            return node, key
    return None
