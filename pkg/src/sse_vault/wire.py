"""Frame codec and message payloads shared by the in-process and TCP transports.

Frame: ``[4-byte big-endian length][1-byte type][payload]`` with
``length = 1 + len(payload)``.  Integers inside payloads are length-prefixed
big-endian magnitudes (2-byte prefix); byte strings carry a 4-byte prefix.
"""

from __future__ import annotations

import struct
from enum import IntEnum

from .ashe import StatefulCiphertext
from .crypto import int_to_bytes
from .errors import FrameError

MAX_FRAME = 64 * 1024 * 1024
_LEN = struct.Struct(">I")


class MsgType(IntEnum):
    SEARCH = 0x01
    SEARCH_RESP = 0x02
    UPDATE = 0x03
    SWAP = 0x04
    STORE = 0x05
    FETCH = 0x06
    FETCH_RESP = 0x07
    ACK = 0x08
    REGISTER = 0x10
    RESOLVE = 0x11


class StoreKind(IntEnum):
    ENTRY = 0x00
    BLOB = 0x01
    DELETE = 0x02


def frame_encode(msg_type: int, payload: bytes = b"") -> bytes:
    msg_type = MsgType(msg_type)
    if 1 + len(payload) > MAX_FRAME:
        raise FrameError("frame exceeds the 64 MiB cap")
    return _LEN.pack(1 + len(payload)) + bytes([msg_type]) + payload


def frame_header(header: bytes) -> int:
    """Validate a 4-byte length prefix; return the number of bytes that follow."""
    if len(header) < 4:
        raise FrameError("truncated frame header")
    (length,) = _LEN.unpack_from(header)
    if length < 1:
        raise FrameError("frame without a type byte")
    if length > MAX_FRAME:
        raise FrameError(f"frame length {length} exceeds cap")
    return length


def frame_decode(buf: bytes) -> tuple[MsgType, bytes]:
    """Decode exactly one frame; never raises anything but FrameError."""
    length = frame_header(buf[:4])
    if len(buf) < 4 + length:
        raise FrameError("truncated frame")
    if len(buf) > 4 + length:
        raise FrameError("trailing bytes after frame")
    try:
        msg_type = MsgType(buf[4])
    except ValueError:
        raise FrameError(f"unknown message type 0x{buf[4]:02x}") from None
    return msg_type, bytes(buf[5:4 + length])


def read_frame(sock_file) -> tuple[MsgType, bytes] | None:
    """Read one frame from a binary file object; None on clean EOF."""
    header = sock_file.read(4)
    if not header:
        return None
    length = frame_header(header)
    body = sock_file.read(length)
    if len(body) < length:
        raise FrameError("connection closed mid-frame")
    return frame_decode(header + body)


class Reader:
    """Cursor over a payload that turns every short read into FrameError."""

    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FrameError("truncated payload")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def u8(self) -> int:
        return self.take(1)[0]

    def u32(self) -> int:
        return int.from_bytes(self.take(4), "big")

    def integer(self) -> int:
        n = int.from_bytes(self.take(2), "big")
        return int.from_bytes(self.take(n), "big")

    def blob(self) -> bytes:
        return self.take(self.u32())

    def text(self) -> str:
        try:
            return self.blob().decode()
        except UnicodeDecodeError:
            raise FrameError("invalid utf-8 in payload") from None

    def ciphertext(self) -> StatefulCiphertext:
        try:
            ct, rest = StatefulCiphertext.read(self.data[self.pos:])
        except ValueError as exc:
            raise FrameError(str(exc)) from None
        self.pos = len(self.data) - len(rest)
        return ct

    def done(self) -> None:
        if self.pos != len(self.data):
            raise FrameError("trailing bytes in payload")


def put_int(value: int) -> bytes:
    raw = int_to_bytes(value)
    if len(raw) > 0xFFFF:
        raise FrameError("integer too large for the wire")
    return len(raw).to_bytes(2, "big") + raw


def put_blob(data: bytes) -> bytes:
    return _LEN.pack(len(data)) + data


def put_text(text: str) -> bytes:
    return put_blob(text.encode())


# -- payload codecs --------------------------------------------------------

def encode_search(trap1: int, trap2: int) -> bytes:
    return frame_encode(MsgType.SEARCH, put_int(trap1) + put_int(trap2))


def decode_search(payload: bytes) -> tuple[int, int]:
    r = Reader(payload)
    out = r.integer(), r.integer()
    r.done()
    return out


def encode_search_resp(status: int, ct: StatefulCiphertext | None) -> bytes:
    body = bytes([status]) + (ct.to_bytes() if ct is not None else b"")
    return frame_encode(MsgType.SEARCH_RESP, body)


def decode_search_resp(payload: bytes) -> tuple[int, StatefulCiphertext | None]:
    r = Reader(payload)
    status = r.u8()
    ct = r.ciphertext() if r.pos < len(payload) else None
    r.done()
    return status, ct


def encode_update(addr: int, e_up: StatefulCiphertext) -> bytes:
    return frame_encode(MsgType.UPDATE, put_int(addr) + e_up.to_bytes())


def decode_update(payload: bytes) -> tuple[int, StatefulCiphertext]:
    r = Reader(payload)
    out = r.integer(), r.ciphertext()
    r.done()
    return out


def encode_swap(addr: int, r_new: int) -> bytes:
    return frame_encode(MsgType.SWAP, put_int(addr) + put_int(r_new))


def decode_swap(payload: bytes) -> tuple[int, int]:
    r = Reader(payload)
    out = r.integer(), r.integer()
    r.done()
    return out


def encode_store_entry(addr: int, witness: int, ct: StatefulCiphertext) -> bytes:
    body = bytes([StoreKind.ENTRY]) + put_int(addr) + put_int(witness) + ct.to_bytes()
    return frame_encode(MsgType.STORE, body)


def encode_store_blob(file_id: int, data: bytes) -> bytes:
    return frame_encode(MsgType.STORE, bytes([StoreKind.BLOB]) + _LEN.pack(file_id) + put_blob(data))


def encode_delete_entry(addr: int) -> bytes:
    return frame_encode(MsgType.STORE, bytes([StoreKind.DELETE]) + put_int(addr))


def decode_store(payload: bytes):
    """Returns (StoreKind, fields...) where fields depend on the kind."""
    r = Reader(payload)
    try:
        kind = StoreKind(r.u8())
    except ValueError:
        raise FrameError("unknown store kind") from None
    if kind is StoreKind.ENTRY:
        out = (kind, r.integer(), r.integer(), r.ciphertext())
    elif kind is StoreKind.BLOB:
        out = (kind, r.u32(), r.blob())
    else:
        out = (kind, r.integer())
    r.done()
    return out


def encode_fetch(ids) -> bytes:
    ids = list(ids)
    return frame_encode(MsgType.FETCH, _LEN.pack(len(ids)) + b"".join(_LEN.pack(i) for i in ids))


def decode_fetch(payload: bytes) -> list[int]:
    r = Reader(payload)
    ids = [r.u32() for _ in range(r.u32())]
    r.done()
    return ids


def encode_fetch_resp(blobs) -> bytes:
    out = bytearray(_LEN.pack(len(blobs)))
    for blob in blobs:
        if blob is None:
            out += b"\x00"
        else:
            out += b"\x01" + put_blob(blob)
    return frame_encode(MsgType.FETCH_RESP, bytes(out))


def decode_fetch_resp(payload: bytes) -> list[bytes | None]:
    r = Reader(payload)
    blobs = []
    for _ in range(r.u32()):
        blobs.append(r.blob() if r.u8() else None)
    r.done()
    return blobs


def encode_ack(status: int, message: str = "") -> bytes:
    return frame_encode(MsgType.ACK, bytes([status]) + put_text(message))


def decode_ack(payload: bytes) -> tuple[int, str]:
    r = Reader(payload)
    out = r.u8(), r.text()
    r.done()
    return out


def encode_register(shard_address: bytes, endpoint: str) -> bytes:
    return frame_encode(MsgType.REGISTER, put_blob(shard_address) + put_text(endpoint))


def decode_register(payload: bytes) -> tuple[bytes, str]:
    r = Reader(payload)
    out = r.blob(), r.text()
    r.done()
    return out


def encode_resolve(shard_address: bytes) -> bytes:
    return frame_encode(MsgType.RESOLVE, put_blob(shard_address))


def decode_resolve(payload: bytes) -> bytes:
    r = Reader(payload)
    out = r.blob()
    r.done()
    return out
