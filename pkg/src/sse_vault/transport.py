"""Shard registry (the DHT table) and two interchangeable transports.

Both transports move the same encoded frames: the in-process one hands
them straight to ``ShardServer.handle_frame``, the TCP one writes them to a
socket served by a threaded loop per shard.
"""

from __future__ import annotations

import socket
import socketserver
import threading
from typing import Optional

from . import wire
from .ashe import StatefulCiphertext
from .errors import FrameError, NotFound, Rejected, SSEError, StateError
from .server import ShardServer, Status
from .wire import MsgType


class Registry:
    """Maps shard addresses (the PRF outputs published in the DHT) to endpoints."""

    def __init__(self):
        self._table: dict[bytes, str] = {}
        self._lock = threading.Lock()

    def register(self, shard_address: bytes, endpoint: str) -> None:
        with self._lock:
            if shard_address in self._table:
                raise StateError("shard address already registered")
            self._table = {**self._table, shard_address: endpoint}

    def resolve(self, shard_address: bytes) -> Optional[str]:
        return self._table.get(shard_address)

    def snapshot(self) -> dict[bytes, str]:
        return dict(self._table)


class InProcNetwork:
    def __init__(self, tap: Optional[list] = None):
        self.registry = Registry()
        self.nodes: dict[str, ShardServer] = {}
        self.tap = tap  # when a list, every request frame is appended to it

    def attach(self, server: ShardServer) -> str:
        endpoint = "inproc:" + server.shard_address.hex()
        self.nodes[endpoint] = server
        self.registry.register(server.shard_address, endpoint)
        return endpoint

    def resolve(self, shard_address: bytes) -> Optional[str]:
        return self.registry.resolve(shard_address)

    def request(self, endpoint: str, frame: bytes) -> bytes:
        try:
            node = self.nodes[endpoint]
        except KeyError:
            raise NotFound(f"endpoint {endpoint} is offline") from None
        if self.tap is not None:
            self.tap.append(frame)
        return node.handle_frame(frame)

    def close(self) -> None:
        pass


# -- TCP ---------------------------------------------------------------------

def _split(endpoint: str) -> tuple[str, int]:
    host, _, port = endpoint.rpartition(":")
    return host, int(port)


class _FrameHandler(socketserver.StreamRequestHandler):
    def handle(self):
        while True:
            try:
                frame = wire.read_frame(self.rfile)
            except FrameError as exc:
                self.wfile.write(wire.encode_ack(Status.BAD_REQUEST, str(exc)))
                return
            except OSError:
                return
            if frame is None:
                return
            msg_type, payload = frame
            self.wfile.write(self.server.respond(msg_type, payload))
            self.wfile.flush()


class _Service(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, host: str, port: int):
        super().__init__((host, port), _FrameHandler)
        self._thread: Optional[threading.Thread] = None

    @property
    def endpoint(self) -> str:
        host, port = self.server_address[:2]
        return f"{host}:{port}"

    def start(self):
        self._thread = threading.Thread(target=self.serve_forever, daemon=True)
        self._thread.start()
        return self

    def stop(self):
        self.shutdown()
        self.server_close()


class TcpShardService(_Service):
    def __init__(self, shard: ShardServer, host: str = "127.0.0.1", port: int = 0, on_change=None):
        super().__init__(host, port)
        self.shard = shard
        self.on_change = on_change

    def respond(self, msg_type, payload):
        resp = self.shard.handle_frame(wire.frame_encode(msg_type, payload))
        if self.on_change and msg_type in (MsgType.UPDATE, MsgType.SWAP, MsgType.STORE):
            self.on_change(self.shard)
        return resp


class TcpRegistryService(_Service):
    def __init__(self, registry: Registry, host: str = "127.0.0.1", port: int = 0):
        super().__init__(host, port)
        self.registry = registry

    def respond(self, msg_type, payload):
        try:
            if msg_type is MsgType.REGISTER:
                self.registry.register(*wire.decode_register(payload))
                return wire.encode_ack(Status.OK)
            if msg_type is MsgType.RESOLVE:
                endpoint = self.registry.resolve(wire.decode_resolve(payload))
                if endpoint is None:
                    return wire.encode_ack(Status.NOT_FOUND, "")
                return wire.encode_ack(Status.OK, endpoint)
            raise FrameError(f"registry cannot handle {msg_type.name}")
        except StateError as exc:
            return wire.encode_ack(Status.STATE_ERROR, str(exc))
        except FrameError as exc:
            return wire.encode_ack(Status.BAD_REQUEST, str(exc))


class TcpNetwork:
    """Client side of the TCP transport: one persistent connection per endpoint."""

    def __init__(self, registry_endpoint: str, timeout: float = 30.0):
        self.registry_endpoint = registry_endpoint
        self.timeout = timeout
        self._conns: dict[str, tuple[socket.socket, object]] = {}
        self._lock = threading.Lock()

    def _conn(self, endpoint: str):
        conn = self._conns.get(endpoint)
        if conn is None:
            try:
                sock = socket.create_connection(_split(endpoint), timeout=self.timeout)
            except OSError as exc:
                raise NotFound(f"endpoint {endpoint} unreachable: {exc}") from None
            conn = (sock, sock.makefile("rb"))
            self._conns[endpoint] = conn
        return conn

    def request(self, endpoint: str, frame: bytes) -> bytes:
        with self._lock:
            sock, rfile = self._conn(endpoint)
            try:
                sock.sendall(frame)
                resp = wire.read_frame(rfile)
            except OSError as exc:
                self._drop(endpoint)
                raise SSEError(f"transport failure talking to {endpoint}: {exc}") from None
            if resp is None:
                self._drop(endpoint)
                raise SSEError(f"{endpoint} closed the connection")
            return wire.frame_encode(*resp)

    def _drop(self, endpoint):
        sock, rfile = self._conns.pop(endpoint)
        rfile.close()
        sock.close()

    def register(self, shard_address: bytes, endpoint: str) -> None:
        _, payload = wire.frame_decode(self.request(self.registry_endpoint, wire.encode_register(shard_address, endpoint)))
        raise_for_ack(payload)

    def resolve(self, shard_address: bytes) -> Optional[str]:
        _, payload = wire.frame_decode(self.request(self.registry_endpoint, wire.encode_resolve(shard_address)))
        status, endpoint = wire.decode_ack(payload)
        if status == Status.NOT_FOUND:
            return None
        if status != Status.OK:
            raise SSEError(endpoint)
        return endpoint

    def close(self) -> None:
        with self._lock:
            for endpoint in list(self._conns):
                self._drop(endpoint)


# -- client-side stub ----------------------------------------------------------

def raise_for_ack(payload: bytes) -> None:
    status, message = wire.decode_ack(payload)
    raise_for_status(status, message)


def raise_for_status(status: int, message: str = "") -> None:
    if status == Status.OK:
        return
    if status == Status.REJECTED:
        raise Rejected(message or "trapdoor rejected")
    if status == Status.NOT_FOUND:
        raise NotFound(message or "no entry at address")
    if status == Status.STATE_ERROR:
        raise StateError(message)
    raise SSEError(message or f"request failed with status {status}")


class ShardStub:
    """Typed calls against one shard endpoint over any transport."""

    def __init__(self, network, endpoint: str):
        self.network = network
        self.endpoint = endpoint

    def _call(self, frame: bytes, expect: MsgType) -> bytes:
        msg_type, payload = wire.frame_decode(self.network.request(self.endpoint, frame))
        if msg_type is MsgType.ACK and expect is not MsgType.ACK:
            raise_for_ack(payload)
        if msg_type is not expect:
            raise FrameError(f"expected {expect.name}, got {msg_type.name}")
        return payload

    def search(self, trap1: int, trap2: int) -> StatefulCiphertext:
        status, ct = wire.decode_search_resp(self._call(wire.encode_search(trap1, trap2), MsgType.SEARCH_RESP))
        raise_for_status(status)
        return ct

    def update(self, addr: int, e_up: StatefulCiphertext) -> None:
        raise_for_ack(self._call(wire.encode_update(addr, e_up), MsgType.ACK))

    def swap(self, addr: int, r_new: int) -> None:
        raise_for_ack(self._call(wire.encode_swap(addr, r_new), MsgType.ACK))

    def store(self, addr: int, witness: int, ct: StatefulCiphertext) -> None:
        raise_for_ack(self._call(wire.encode_store_entry(addr, witness, ct), MsgType.ACK))

    def delete(self, addr: int) -> None:
        raise_for_ack(self._call(wire.encode_delete_entry(addr), MsgType.ACK))

    def put_blob(self, file_id: int, data: bytes) -> None:
        raise_for_ack(self._call(wire.encode_store_blob(file_id, data), MsgType.ACK))

    def fetch(self, ids) -> list[Optional[bytes]]:
        return wire.decode_fetch_resp(self._call(wire.encode_fetch(ids), MsgType.FETCH_RESP))
