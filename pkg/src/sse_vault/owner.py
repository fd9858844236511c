"""The data owner: key hierarchy, encrypted-database generation, authorization,
update preparation and revocation.

The owner never talks to a server itself.  Each mutating call returns the
messages to deliver (entries to store, update ciphertexts, witness swaps)
and publishes public tokens on the bulletin.
"""

from __future__ import annotations

import secrets as _secrets
import threading
from contextlib import contextmanager
from dataclasses import dataclass
from typing import Iterable, Mapping, Sequence

from .ashe import StatefulCiphertext, ashe_encrypt
from .bitmap import Bitmap, Op, bitmap_from_ids, bitmap_update_string
from .bulletin import Bulletin, KeywordSecrets, PubToken, mask_token
from .crypto import (LAMBDA, LAMBDA_P, LAMBDA_Q, ChameleonParams, ChameleonTrapdoor,
                     ch_forge, ch_hash, ch_setup, encode, h1, prf, random_key, scalar_len)
from .errors import CapacityError, SSEError, StateError
from .keytree import KeyTree, make_path_token, path_key, roots_subtrees, tree_build
from .server import EdbEntry


@dataclass(frozen=True)
class Security:
    lam: int = LAMBDA
    lambda_q: int = LAMBDA_Q
    lambda_p: int = LAMBDA_P


@dataclass
class KeywordEpoch:
    attribute: str
    label: bytes
    state: int
    k3_state: int
    ashe_state: int
    k1: int
    k2: int
    k3: bytes
    r_secret: int
    addr: int
    witness: int
    version: int = 0


@dataclass(frozen=True)
class UpdateMessage:
    addr: int
    e_up: StatefulCiphertext


@dataclass(frozen=True)
class SwapMessage:
    addr: int
    r_new: int


@dataclass
class EncryptedDatabase:
    shards: dict[str, dict[int, EdbEntry]]
    dht: dict[str, bytes]


def derive_keyword_keys(k_att: bytes, w: str, st: int, q: int) -> tuple[int, int, bytes]:
    """K1, K2 are scalars in Z*_q; K3 is a full-length PRF key for the XOR cipher."""
    k1 = h1(q, prf(k_att, encode(w, 0, st)))
    k2 = h1(q, prf(k_att, encode(w, 1, st)))
    k3 = prf(k_att, encode(w, 2, st))
    return k1, k2, k3


class DataOwner:
    def __init__(self, master: bytes, params: ChameleonParams, trapdoor: ChameleonTrapdoor,
                 clients: Sequence[str], attribute_map: Mapping[str, str], gamma: int,
                 rng=None):
        if not trapdoor.matches(params):
            raise StateError("trapdoor does not match chameleon parameters")
        if not attribute_map:
            raise ValueError("keyword set is empty")
        self.master = master
        self.params = params
        self.trapdoor = trapdoor
        self.gamma = gamma
        self.rng = rng or _secrets.SystemRandom()
        self.tree: KeyTree = tree_build(master, list(clients))
        self.attribute_of = dict(attribute_map)
        self.dht_states = {att: 1 for att in sorted(set(attribute_map.values()))}
        self.labels: dict[str, bytes] = {}
        self.client_labels: dict[str, bytes] = {}
        self.epochs: dict[str, KeywordEpoch] = {}
        self.index: dict[str, set[int]] = {}
        self.authorized: dict[str, set[str]] = {}
        self.clock = 0
        self.inserted_at: dict[str, dict[int, int]] = {}
        self.mutations = 0
        self._writer = threading.Lock()
        self.bulletin = Bulletin()

    # -- key hierarchy -------------------------------------------------------

    @property
    def clients(self) -> list[str]:
        return self.tree.clients

    @property
    def slen(self) -> int:
        return scalar_len(self.params.q)

    def client_key(self, client: str) -> bytes:
        return prf(self.master, encode("client", client))

    def dht_key(self, att: str) -> bytes:
        return prf(self.master, encode("dht", self.dht_states[att], att))

    def shard_address(self, att: str) -> bytes:
        return prf(self.dht_key(att), encode(att))

    def attribute_key(self, att: str) -> bytes:
        return prf(self.master, encode("att", att))

    def keyword_directory(self) -> dict[str, bytes]:
        """keyword -> public label, handed to clients at enrolment."""
        return dict(self.labels)

    @contextmanager
    def _mutating(self):
        if not self._writer.acquire(blocking=False):
            raise StateError("concurrent mutation of owner state")
        try:
            yield
            self.mutations += 1
            self.clock += 1
        finally:
            self._writer.release()

    def _epoch(self, w: str) -> KeywordEpoch:
        try:
            return self.epochs[w]
        except KeyError:
            raise StateError(f"unknown keyword {w!r}") from None

    def _fresh_label(self, taken: Iterable[bytes]) -> bytes:
        taken = set(taken)
        while True:
            label = random_key(self.rng, len(self.master))
            if label not in taken:
                return label

    def publish_path_tokens(self) -> None:
        for c in self.clients:
            token = make_path_token(path_key(self.tree, c), self.client_key(c), self.rng)
            while token.label in self.client_labels.values():
                token = make_path_token(path_key(self.tree, c), self.client_key(c), self.rng)
            self.client_labels[c] = token.label
            self.bulletin.path_tokens[c] = token

    # -- EDB generation ------------------------------------------------------

    def build_edb(self, db: Mapping[str, Iterable[int]]) -> EncryptedDatabase:
        if self.epochs:
            raise StateError("encrypted database already built")
        unknown = set(db) - set(self.attribute_of)
        if unknown:
            raise StateError(f"keywords without attribute: {sorted(unknown)}")
        q = self.params.q
        dht = {att: self.shard_address(att) for att in self.dht_states}
        shards: dict[str, dict[int, EdbEntry]] = {att: {} for att in dht}
        seen_addrs: set[int] = set()
        with self._mutating():
            for att in dht:
                k_att = self.attribute_key(att)
                for w in sorted(k for k, a in self.attribute_of.items() if a == att):
                    ids = set(db.get(w, ()))
                    bitmap = bitmap_from_ids(ids, self.gamma)
                    label = self._fresh_label(self.labels.values())
                    st = 1
                    k1, k2, k3 = derive_keyword_keys(k_att, w, st, q)
                    r_secret = self.rng.randint(1, q - 1)
                    addr = ch_hash(self.params, k1, r_secret)
                    if addr in seen_addrs:
                        raise SSEError("map address collision; rebuild with fresh randomness")
                    seen_addrs.add(addr)
                    witness = ch_forge(self.params, self.trapdoor, k1, k2, r_secret)
                    e = ashe_encrypt(k3, bitmap.to_bytes(), st)
                    shards[att][addr] = EdbEntry(witness, e)
                    self.labels[w] = label
                    self.epochs[w] = KeywordEpoch(att, label, st, st, st, k1, k2, k3, r_secret, addr, witness)
                    self.index[w] = ids
                    self.authorized[w] = set()
                    self.inserted_at[w] = {i: self.clock for i in ids}
        self.bulletin.dht = list(dht.values())
        return EncryptedDatabase(shards, dht)

    # -- authorization -------------------------------------------------------

    def secrets_for(self, w: str) -> KeywordSecrets:
        e = self._epoch(w)
        return KeywordSecrets(e.attribute, self.dht_key(e.attribute), e.k1, e.k2, e.k3, e.r_secret)

    def _issue(self, w: str, clients: Iterable[str]) -> list[PubToken]:
        clients = set(clients)
        if not clients:
            return []
        e = self._epoch(w)
        payload = self.secrets_for(w)
        cover = roots_subtrees(self.tree, clients)
        return [mask_token(payload, d, self.tree.node_keys[d], e.label, self.slen) for d in sorted(cover)]

    def authorize(self, w: str, clients: Iterable[str]) -> list[PubToken]:
        """Publish tokens for the current key version over the cover of ``clients``.

        The new set must contain everyone already authorized; shrinking needs revoke().
        """
        clients = set(clients)
        if not clients:
            raise ValueError("authorized set is empty")
        e = self._epoch(w)
        dropped = self.authorized[w] - clients
        if dropped:
            raise StateError(f"clients {sorted(dropped)} would keep keys; use revoke")
        with self._mutating():
            tokens = self._issue(w, clients)
            self.authorized[w] = clients
        self.bulletin.publish_keyword(e.label, tokens)
        return tokens

    # -- updates -------------------------------------------------------------

    def make_update(self, w: str, op: Op, ids: Iterable[int]) -> UpdateMessage:
        ids = set(ids)
        if op is Op.ADD:
            return self.make_mixed_update(w, added=ids, deleted=())
        return self.make_mixed_update(w, added=(), deleted=ids)

    def make_mixed_update(self, w: str, added: Iterable[int], deleted: Iterable[int]) -> UpdateMessage:
        added, deleted = set(added), set(deleted)
        e = self._epoch(w)
        current = self.index[w]
        for i in added | deleted:
            if not 0 <= i < self.gamma:
                raise CapacityError(f"file id {i} outside capacity {self.gamma}")
        if added & deleted:
            raise StateError("file ids both added and deleted")
        if added & current:
            raise StateError(f"already present: {sorted(added & current)}")
        if deleted - current:
            raise StateError(f"not present: {sorted(deleted - current)}")
        with self._mutating():
            up = bitmap_update_string(Op.ADD, added | deleted, self.gamma)
            e.state += 1
            e.ashe_state += 1
            e_up = ashe_encrypt(e.k3, up.to_bytes(), e.ashe_state)
            current ^= added | deleted
            stamps = self.inserted_at[w]
            for i in deleted:
                stamps.pop(i, None)
            for i in added:
                stamps[i] = self.clock
        return UpdateMessage(e.addr, e_up)

    # -- revocation ----------------------------------------------------------

    def revoke(self, w: str, remaining: Iterable[str]) -> tuple[list[PubToken], SwapMessage]:
        remaining = set(remaining)
        e = self._epoch(w)
        for c in remaining:
            if c not in self.tree.leaf_of:
                raise StateError(f"unknown client {c!r}")
        q = self.params.q
        with self._mutating():
            e.state += 1
            k1_new, k2_new, _ = derive_keyword_keys(self.attribute_key(e.attribute), w, e.state, q)
            r_secret_new = ch_forge(self.params, self.trapdoor, e.k1, k1_new, e.r_secret)
            witness_new = ch_forge(self.params, self.trapdoor, e.k1, k2_new, e.r_secret)
            e.k1, e.k2, e.r_secret, e.witness = k1_new, k2_new, r_secret_new, witness_new
            e.version += 1
            tokens = self._issue(w, remaining)
            self.authorized[w] = remaining
        self.bulletin.publish_keyword(e.label, tokens)
        return tokens, SwapMessage(e.addr, witness_new)

    # -- ground truth ----------------------------------------------------------

    def bitmap(self, w: str) -> Bitmap:
        return bitmap_from_ids(self.index[w], self.gamma)

    def time_db(self) -> dict[str, list[tuple[int, int]]]:
        """Per keyword, surviving (insertion time, file id) pairs."""
        return {w: sorted((t, i) for i, t in stamps.items()) for w, stamps in self.inserted_at.items()}


def owner_init(clients: Sequence[str], attribute_map: Mapping[str, str], *, gamma: int = 1024,
               security: Security = Security(), chameleon=None, rng=None):
    """Phase-one setup.  Returns (owner, bulletin, {client: k_id}).

    ``chameleon`` may carry a pre-generated (params, trapdoor) pair; generating
    1024-bit groups is the slow part of setup.
    """
    rng = rng or _secrets.SystemRandom()
    if chameleon is None:
        chameleon = ch_setup(security.lambda_p, security.lambda_q, rng)
    params, trapdoor = chameleon
    master = random_key(rng, security.lam // 8)
    owner = DataOwner(master, params, trapdoor, clients, attribute_map, gamma, rng)
    owner.publish_path_tokens()
    keys = {c: owner.client_key(c) for c in owner.clients}
    return owner, owner.bulletin, keys
