"""Versioned on-disk containers for shard, owner and bulletin state.

Layout: ``b"SSEV1"``, 1-byte format version, 1-byte kind, then records
``[4-byte length][1-byte tag][payload][4-byte CRC-32 of tag+payload]``.
A final END record carries the record count, so truncation at a record
boundary is detected too.
Shard files are byte-deterministic: entries and blobs are written in
address / id order.
"""

from __future__ import annotations

import json
import os
import struct
import zlib
from pathlib import Path
from typing import Iterable

from .bulletin import Bulletin, PubToken
from .crypto import ChameleonParams, ChameleonTrapdoor
from .errors import CorruptFile, FrameError
from .keytree import PathKeyToken
from .owner import DataOwner, KeywordEpoch
from .server import EdbEntry, ShardServer
from .wire import Reader, put_blob, put_int, put_text

MAGIC = b"SSEV1"
FORMAT_VERSION = 1
ENV_DATA_DIR = "SSE_VAULT_DATA_DIR"

KIND_SHARD, KIND_OWNER, KIND_BULLETIN = 1, 2, 3

# record tags
META, ENTRY, BLOB, TRANSCRIPT = 0x01, 0x02, 0x03, 0x04
OWNER_STATE, OWNER_BULLETIN = 0x10, 0x11
PATHTOKEN, PUBTOKEN, DHT = 0x20, 0x21, 0x22
END = 0xFF

_U32 = struct.Struct(">I")


def data_dir(default: str | os.PathLike = "sse-data") -> Path:
    return Path(os.environ.get(ENV_DATA_DIR, default))


def write_container(kind: int, records: Iterable[tuple[int, bytes]]) -> bytes:
    out = bytearray(MAGIC + bytes([FORMAT_VERSION, kind]))
    count = 0
    for tag, payload in records:
        out += _record(tag, payload)
        count += 1
    out += _record(END, _U32.pack(count))
    return bytes(out)


def _record(tag: int, payload: bytes) -> bytes:
    body = bytes([tag]) + payload
    return _U32.pack(len(body)) + body + _U32.pack(zlib.crc32(body))


def read_container(data: bytes, kind: int) -> list[tuple[int, bytes]]:
    if data[:len(MAGIC)] != MAGIC:
        raise CorruptFile("missing SSEV1 header")
    if len(data) < len(MAGIC) + 2:
        raise CorruptFile("truncated header")
    version, found = data[len(MAGIC)], data[len(MAGIC) + 1]
    if version != FORMAT_VERSION:
        raise CorruptFile(f"unsupported format version {version}")
    if found != kind:
        raise CorruptFile(f"expected container kind {kind}, found {found}")
    records = []
    pos = len(MAGIC) + 2
    while pos < len(data):
        if pos + 4 > len(data):
            raise CorruptFile("truncated record header")
        (n,) = _U32.unpack_from(data, pos)
        end = pos + 4 + n + 4
        if n < 1 or end > len(data):
            raise CorruptFile("truncated record")
        body = data[pos + 4:pos + 4 + n]
        (crc,) = _U32.unpack_from(data, pos + 4 + n)
        if zlib.crc32(body) != crc:
            raise CorruptFile(f"checksum mismatch in record at offset {pos}")
        records.append((body[0], bytes(body[1:])))
        pos = end
    if not records or records[-1][0] != END:
        raise CorruptFile("missing end record (truncated file)")
    tag, count = records.pop()
    if count != _U32.pack(len(records)) or any(t == END for t, _ in records):
        raise CorruptFile("record count mismatch")
    return records


def write_file(path: str | os.PathLike, data: bytes) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    tmp = path.with_suffix(path.suffix + ".tmp")
    tmp.write_bytes(data)
    os.replace(tmp, path)


# -- shard -------------------------------------------------------------------

def persist_shard(shard: ShardServer) -> bytes:
    records = [(META, put_blob(shard.shard_address) + put_blob(shard.params.to_bytes())
                + shard.clock.to_bytes(8, "big"))]
    for addr in sorted(shard.entries):
        entry = shard.entries[addr]
        records.append((ENTRY, put_int(addr) + put_int(entry.r) + entry.e.to_bytes()))
    for file_id in sorted(shard.blobs):
        records.append((BLOB, _U32.pack(file_id) + put_blob(shard.blobs[file_id])))
    for rec in shard.transcript:
        records.append((TRANSCRIPT, json.dumps(rec, sort_keys=True, separators=(",", ":")).encode()))
    return write_container(KIND_SHARD, records)


def load_shard(data: bytes) -> ShardServer:
    records = read_container(data, KIND_SHARD)
    if not records or records[0][0] != META:
        raise CorruptFile("shard file lacks metadata")
    try:
        r = Reader(records[0][1])
        shard = ShardServer(r.blob(), ChameleonParams.from_bytes(r.blob()))
        shard.clock = int.from_bytes(r.take(8), "big")
        r.done()
        for tag, payload in records[1:]:
            r = Reader(payload)
            if tag == ENTRY:
                addr, witness = r.integer(), r.integer()
                shard.entries[addr] = EdbEntry(witness, r.ciphertext())
            elif tag == BLOB:
                file_id = r.u32()
                shard.blobs[file_id] = r.blob()
            elif tag == TRANSCRIPT:
                shard.transcript.append(json.loads(payload))
                continue
            else:
                raise CorruptFile(f"unknown shard record tag {tag}")
            r.done()
    except (FrameError, ValueError) as exc:
        raise CorruptFile(f"malformed shard record: {exc}") from None
    return shard


# -- bulletin ----------------------------------------------------------------

def persist_bulletin(bulletin: Bulletin) -> bytes:
    records = []
    for client in sorted(bulletin.path_tokens):
        tok = bulletin.path_tokens[client]
        records.append((PATHTOKEN, put_text(client) + put_blob(tok.label) + put_blob(tok.mask_output)))
    for label in sorted(bulletin.pub_tokens):
        # an empty group still has to be recorded: it marks a revoke-all
        group = bulletin.pub_tokens[label]
        payload = put_blob(label) + _U32.pack(len(group))
        for tok in group:
            payload += _U32.pack(tok.node_id) + put_text(tok.attribute) + put_blob(tok.masked)
        records.append((PUBTOKEN, payload))
    for address in bulletin.dht:
        records.append((DHT, put_blob(address)))
    return write_container(KIND_BULLETIN, records)


def load_bulletin(data: bytes) -> Bulletin:
    bulletin = Bulletin()
    try:
        for tag, payload in read_container(data, KIND_BULLETIN):
            r = Reader(payload)
            if tag == PATHTOKEN:
                client = r.text()
                bulletin.path_tokens[client] = PathKeyToken(r.blob(), r.blob())
            elif tag == PUBTOKEN:
                label = r.blob()
                group = []
                for _ in range(r.u32()):
                    node_id = r.u32()
                    group.append(PubToken(label, node_id, r.text(), r.blob()))
                bulletin.pub_tokens[label] = group
            elif tag == DHT:
                bulletin.dht.append(r.blob())
            else:
                raise CorruptFile(f"unknown bulletin record tag {tag}")
            r.done()
    except FrameError as exc:
        raise CorruptFile(f"malformed bulletin record: {exc}") from None
    return bulletin


# -- owner -------------------------------------------------------------------

def persist_owner(owner: DataOwner) -> bytes:
    state = {
        "master": owner.master.hex(),
        "params": owner.params.to_bytes().hex(),
        "xi": owner.trapdoor.xi,
        "gamma": owner.gamma,
        "clients": owner.clients,
        "attribute_of": owner.attribute_of,
        "dht_states": owner.dht_states,
        "labels": {w: v.hex() for w, v in owner.labels.items()},
        "client_labels": {c: v.hex() for c, v in owner.client_labels.items()},
        "epochs": {w: {**vars(e), "label": e.label.hex(), "k3": e.k3.hex()} for w, e in owner.epochs.items()},
        "index": {w: sorted(ids) for w, ids in owner.index.items()},
        "authorized": {w: sorted(cs) for w, cs in owner.authorized.items()},
        "clock": owner.clock,
        "inserted_at": {w: {str(i): t for i, t in s.items()} for w, s in owner.inserted_at.items()},
        "mutations": owner.mutations,
    }
    payload = json.dumps(state, sort_keys=True, separators=(",", ":")).encode()
    return write_container(KIND_OWNER, [(OWNER_STATE, payload)] + [(OWNER_BULLETIN, persist_bulletin(owner.bulletin))])


def load_owner(data: bytes, rng=None) -> DataOwner:
    records = dict(read_container(data, KIND_OWNER))
    try:
        s = json.loads(records[OWNER_STATE])
        params = ChameleonParams.from_bytes(bytes.fromhex(s["params"]))
        owner = DataOwner(bytes.fromhex(s["master"]), params, ChameleonTrapdoor(s["xi"]),
                          s["clients"], s["attribute_of"], s["gamma"], rng)
        owner.dht_states = s["dht_states"]
        owner.labels = {w: bytes.fromhex(v) for w, v in s["labels"].items()}
        owner.client_labels = {c: bytes.fromhex(v) for c, v in s["client_labels"].items()}
        owner.epochs = {w: KeywordEpoch(**{**e, "label": bytes.fromhex(e["label"]), "k3": bytes.fromhex(e["k3"])})
                        for w, e in s["epochs"].items()}
        owner.index = {w: set(ids) for w, ids in s["index"].items()}
        owner.authorized = {w: set(cs) for w, cs in s["authorized"].items()}
        owner.clock = s["clock"]
        owner.inserted_at = {w: {int(i): t for i, t in m.items()} for w, m in s["inserted_at"].items()}
        owner.mutations = s["mutations"]
        owner.bulletin = load_bulletin(records[OWNER_BULLETIN])
    except (KeyError, ValueError, TypeError) as exc:
        raise CorruptFile(f"malformed owner state: {exc}") from None
    return owner
