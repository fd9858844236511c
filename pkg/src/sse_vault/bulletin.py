"""The owner's public bulletin board and the keyword-token payload layout."""

from __future__ import annotations

from dataclasses import dataclass, field

from .crypto import prf, prf_expand
from .errors import IntegrityError
from .keytree import PathKeyToken


@dataclass(frozen=True)
class KeywordSecrets:
    """Everything an authorized client needs to search one keyword."""

    attribute: str
    k_dht: bytes
    k1: int
    k2: int
    k3: bytes
    r_secret: int


@dataclass(frozen=True)
class PubToken:
    label: bytes
    node_id: int
    attribute: str
    masked: bytes


def pack_secrets(s: KeywordSecrets, slen: int) -> bytes:
    check = prf(s.k3, b"chk")
    return (s.k_dht + s.k1.to_bytes(slen, "big") + s.k2.to_bytes(slen, "big")
            + s.k3 + s.r_secret.to_bytes(slen, "big") + check)


def unpack_secrets(raw: bytes, attribute: str, klen: int, slen: int) -> KeywordSecrets:
    if len(raw) != 3 * klen + 3 * slen:
        raise IntegrityError("token payload has the wrong length")
    pos = 0

    def take(n):
        nonlocal pos
        chunk = raw[pos:pos + n]
        pos += n
        return chunk

    k_dht = take(klen)
    k1 = int.from_bytes(take(slen), "big")
    k2 = int.from_bytes(take(slen), "big")
    k3 = take(klen)
    r_secret = int.from_bytes(take(slen), "big")
    if take(klen) != prf(k3, b"chk"):
        raise IntegrityError("token check field mismatch")
    return KeywordSecrets(attribute, k_dht, k1, k2, k3, r_secret)


def mask_token(secrets: KeywordSecrets, node_id: int, node_key: bytes, label: bytes, slen: int) -> PubToken:
    raw = pack_secrets(secrets, slen)
    mask = prf_expand(node_key, label, len(raw))
    return PubToken(label, node_id, secrets.attribute, bytes(a ^ b for a, b in zip(raw, mask)))


def unmask_token(token: PubToken, node_key: bytes, slen: int) -> KeywordSecrets:
    mask = prf_expand(node_key, token.label, len(token.masked))
    raw = bytes(a ^ b for a, b in zip(token.masked, mask))
    return unpack_secrets(raw, token.attribute, len(node_key), slen)


@dataclass
class Bulletin:
    """Public records: path-key tokens per client, keyword tokens per label, DHT addresses."""

    path_tokens: dict[str, PathKeyToken] = field(default_factory=dict)
    pub_tokens: dict[bytes, list[PubToken]] = field(default_factory=dict)
    dht: list[bytes] = field(default_factory=list)

    def publish_keyword(self, label: bytes, tokens: list[PubToken]) -> None:
        # replaces (deletes) whatever was published for this label before
        self.pub_tokens[label] = list(tokens)

    def tokens_for(self, label: bytes) -> list[PubToken]:
        return list(self.pub_tokens.get(label, ()))
