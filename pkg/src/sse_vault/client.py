"""The searching client.

A client holds its secret ``k_id`` and a keyword directory (keyword -> public
label).  From the bulletin it recovers its path key once, unlocks keyword
credentials through whichever cover node it shares with a token, derives the
shard address, and sends a trapdoor.  On a rejected trapdoor it re-reads the
bulletin once, which is how post-revocation credentials are picked up.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Mapping, Optional

from .ashe import StatefulCiphertext, ashe_decrypt
from .bitmap import Bitmap, bitmap_to_ids
from .bulletin import Bulletin, KeywordSecrets, unmask_token
from .crypto import ChameleonParams, ch_hash, encode, prf, scalar_len
from .errors import IntegrityError, NotAuthorized, NotFound, Rejected
from .keytree import PathKey, recover_path_key
from .transport import ShardStub


@dataclass(frozen=True)
class Trapdoor:
    trap1: int
    trap2: int


class Client:
    def __init__(self, client_id: str, k_id: bytes, params: ChameleonParams, gamma: int,
                 bulletin: Bulletin, network, directory: Mapping[str, bytes]):
        self.id = client_id
        self.k_id = k_id
        self.params = params
        self.gamma = gamma
        self.bulletin = bulletin
        self.network = network
        self.directory = dict(directory)
        self._pathkey: Optional[PathKey] = None
        self.unlocked: dict[bytes, KeywordSecrets] = {}

    @property
    def pathkey(self) -> PathKey:
        if self._pathkey is None:
            token = self.bulletin.path_tokens.get(self.id)
            if token is None:
                raise NotAuthorized(f"no path-key token for client {self.id!r}")
            self._pathkey = recover_path_key(token, self.k_id)
        return self._pathkey

    def label_of(self, keyword: str) -> bytes:
        try:
            return self.directory[keyword]
        except KeyError:
            raise NotFound(f"unknown keyword {keyword!r}") from None

    def unlock_keyword(self, label: bytes) -> KeywordSecrets:
        mine = dict(self.pathkey.entries)
        for token in self.bulletin.tokens_for(label):
            node_key = mine.get(token.node_id)
            if node_key is None:
                continue
            try:
                secrets = unmask_token(token, node_key, scalar_len(self.params.q))
            except IntegrityError:
                continue
            self.unlocked[label] = secrets
            return secrets
        self.unlocked.pop(label, None)
        raise NotAuthorized(f"client {self.id!r} cannot unlock this keyword")

    def credentials(self, label: bytes) -> KeywordSecrets:
        cached = self.unlocked.get(label)
        return cached if cached is not None else self.unlock_keyword(label)

    def locate_shard(self, secrets: KeywordSecrets) -> str:
        address = prf(secrets.k_dht, encode(secrets.attribute))
        endpoint = self.network.resolve(address)
        if endpoint is None:
            raise NotFound("shard address not registered in the DHT")
        return endpoint

    def gen_trapdoor(self, secrets: KeywordSecrets) -> Trapdoor:
        return Trapdoor(ch_hash(self.params, secrets.k1, secrets.r_secret), secrets.k2)

    def decrypt_result(self, secrets: KeywordSecrets, ct: StatefulCiphertext) -> list[int]:
        plain = ashe_decrypt(secrets.k3, ct)
        return bitmap_to_ids(Bitmap.from_bytes(plain, self.gamma))

    def _search_once(self, secrets: KeywordSecrets) -> list[int]:
        stub = ShardStub(self.network, self.locate_shard(secrets))
        trap = self.gen_trapdoor(secrets)
        return self.decrypt_result(secrets, stub.search(trap.trap1, trap.trap2))

    def search(self, keyword: str) -> list[int]:
        """Return the sorted file ids for ``keyword``.

        Raises NotAuthorized if no token can be unlocked, Rejected if the
        server refuses even freshly read credentials.
        """
        label = self.label_of(keyword)
        secrets = self.credentials(label)
        try:
            return self._search_once(secrets)
        except Rejected:
            try:
                fresh = self.unlock_keyword(label)
            except NotAuthorized:
                raise Rejected(f"client {self.id!r} has been revoked") from None
            if fresh == secrets:
                raise
            return self._search_once(fresh)

    def fetch(self, keyword: str) -> dict[int, Optional[bytes]]:
        """Search, then fetch the matching blobs; file ids travel in the clear."""
        ids = self.search(keyword)
        secrets = self.unlocked[self.label_of(keyword)]
        blobs = ShardStub(self.network, self.locate_shard(secrets)).fetch(ids)
        return dict(zip(ids, blobs))
