"""A storage shard: one slice of the encrypted map plus opaque file blobs.

The shard only ever sees chameleon-hash addresses, collision witnesses,
ciphertexts with their public state interval, and the trapdoor scalar it
verifies.  Every index operation is logged to a transcript with a logical
timestamp; the transcript is what the leakage auditor inspects.
"""

from __future__ import annotations

import threading
from collections import defaultdict
from dataclasses import dataclass
from enum import IntEnum
from typing import Optional

from .ashe import StatefulCiphertext, ashe_add
from .crypto import ChameleonParams, ch_hash
from .errors import FrameError, NotFound, SSEError, StateError
from . import wire
from .wire import MsgType, StoreKind


class Status(IntEnum):
    OK = 0
    REJECTED = 1
    NOT_FOUND = 2
    STATE_ERROR = 3
    BAD_REQUEST = 4


@dataclass(frozen=True)
class EdbEntry:
    r: int
    e: StatefulCiphertext


class ShardServer:
    def __init__(self, shard_address: bytes, params: ChameleonParams):
        self.shard_address = shard_address
        self.params = params
        self.entries: dict[int, EdbEntry] = {}
        self.blobs: dict[int, bytes] = {}
        self.transcript: list[dict] = []
        self.clock = 0
        self._log_lock = threading.Lock()
        self._addr_locks: defaultdict[int, threading.Lock] = defaultdict(threading.Lock)
        self._locks_lock = threading.Lock()

    def _lock_for(self, addr: int) -> threading.Lock:
        with self._locks_lock:
            return self._addr_locks[addr]

    def _record(self, kind: str, addr: int, **fields) -> None:
        with self._log_lock:
            self.clock += 1
            self.transcript.append({"ts": self.clock, "kind": kind, "addr": addr, **fields})

    def handle_search(self, trap1: int, trap2: int) -> tuple[Status, Optional[StatefulCiphertext]]:
        entry = self.entries.get(trap1)
        if entry is None:
            status, result = Status.NOT_FOUND, None
        elif ch_hash(self.params, trap2, entry.r) != trap1:
            status, result = Status.REJECTED, None
        else:
            status, result = Status.OK, entry.e
        self._record("SEARCH", trap1, status=status.name)
        return status, result

    def apply_update(self, addr: int, e_up: StatefulCiphertext) -> None:
        with self._lock_for(addr):
            entry = self.entries.get(addr)
            if entry is None:
                raise NotFound(f"no entry at address {addr:x}")
            folded = ashe_add(entry.e, e_up)
            self.entries[addr] = EdbEntry(entry.r, folded)
            self._record("UPDATE", addr, interval=[e_up.base, e_up.cur])

    def swap_witness(self, addr: int, r_new: int) -> None:
        with self._lock_for(addr):
            entry = self.entries.get(addr)
            if entry is None:
                raise NotFound(f"no entry at address {addr:x}")
            self.entries[addr] = EdbEntry(r_new, entry.e)
            self._record("REVOKE", addr)

    def store_entry(self, addr: int, entry: EdbEntry) -> None:
        with self._lock_for(addr):
            if addr in self.entries:
                raise StateError(f"address {addr:x} already stored")
            self.entries[addr] = entry
            self._record("STORE", addr, interval=[entry.e.base, entry.e.cur])

    def delete_entry(self, addr: int) -> None:
        with self._lock_for(addr):
            if self.entries.pop(addr, None) is None:
                raise NotFound(f"no entry at address {addr:x}")
            self._record("DELETE", addr)

    def put_blob(self, file_id: int, data: bytes) -> None:
        self.blobs[file_id] = bytes(data)

    def fetch_blobs(self, ids) -> list[Optional[bytes]]:
        # blob serving is outside the index protocol and not transcribed
        return [self.blobs.get(i) for i in ids]

    def handle_frame(self, frame: bytes) -> bytes:
        """Decode one request frame, execute it, return the encoded response frame."""
        try:
            msg_type, payload = wire.frame_decode(frame)
            if msg_type is MsgType.SEARCH:
                status, ct = self.handle_search(*wire.decode_search(payload))
                return wire.encode_search_resp(status, ct)
            if msg_type is MsgType.FETCH:
                return wire.encode_fetch_resp(self.fetch_blobs(wire.decode_fetch(payload)))
            if msg_type is MsgType.UPDATE:
                self.apply_update(*wire.decode_update(payload))
            elif msg_type is MsgType.SWAP:
                self.swap_witness(*wire.decode_swap(payload))
            elif msg_type is MsgType.STORE:
                kind, *args = wire.decode_store(payload)
                if kind is StoreKind.ENTRY:
                    addr, witness, ct = args
                    self.store_entry(addr, EdbEntry(witness, ct))
                elif kind is StoreKind.BLOB:
                    self.put_blob(*args)
                else:
                    self.delete_entry(*args)
            else:
                raise FrameError(f"shard cannot handle {msg_type.name}")
        except Exception as exc:
            return wire.encode_ack(status_of(exc), str(exc))
        return wire.encode_ack(Status.OK)


def status_of(exc: Exception) -> Status:
    if isinstance(exc, NotFound):
        return Status.NOT_FOUND
    if isinstance(exc, StateError):
        return Status.STATE_ERROR
    if isinstance(exc, (SSEError, ValueError)):
        return Status.BAD_REQUEST
    raise exc
