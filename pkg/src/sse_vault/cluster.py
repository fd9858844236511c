"""Wires an owner, one shard per attribute, a registry and clients together."""

from __future__ import annotations

from typing import Iterable, Mapping, Optional, Sequence

from .bitmap import Op
from .client import Client
from .owner import DataOwner, Security, owner_init
from .server import ShardServer
from .transport import InProcNetwork, Registry, ShardStub, TcpNetwork, TcpRegistryService, TcpShardService


class Cluster:
    def __init__(self, owner: DataOwner, client_keys: Mapping[str, bytes], shards: dict[str, ShardServer],
                 transport: str = "inproc", tap: Optional[list] = None):
        self.owner = owner
        self.client_keys = dict(client_keys)
        self.shards = shards
        self.transport = transport
        self._services: list = []
        if transport == "inproc":
            self.network = InProcNetwork(tap)
            for shard in shards.values():
                self.network.attach(shard)
        elif transport == "tcp":
            registry = TcpRegistryService(Registry()).start()
            self._services.append(registry)
            self.network = TcpNetwork(registry.endpoint)
            for shard in shards.values():
                svc = TcpShardService(shard).start()
                self._services.append(svc)
                self.network.register(shard.shard_address, svc.endpoint)
        else:
            raise ValueError(f"unknown transport {transport!r}")
        self.clients: dict[str, Client] = {}

    @classmethod
    def create(cls, clients: Sequence[str], attribute_map: Mapping[str, str], db: Mapping[str, Iterable[int]],
               *, gamma: int = 1024, security: Security = Security(), chameleon=None, rng=None,
               transport: str = "inproc", blobs: Optional[Mapping[int, bytes]] = None,
               tap: Optional[list] = None) -> Cluster:
        owner, _, keys = owner_init(clients, attribute_map, gamma=gamma, security=security,
                                    chameleon=chameleon, rng=rng)
        edb = owner.build_edb(db)
        shards = {att: ShardServer(addr, owner.params) for att, addr in edb.dht.items()}
        cluster = cls(owner, keys, shards, transport, tap)
        for att, entries in edb.shards.items():
            stub = cluster.stub(att)
            for addr in sorted(entries):
                entry = entries[addr]
                stub.store(addr, entry.r, entry.e)
        for file_id, data in sorted((blobs or {}).items()):
            for att in sorted({owner.attribute_of[w] for w, ids in db.items() if file_id in set(ids)}):
                cluster.stub(att).put_blob(file_id, data)
        return cluster

    def stub(self, attribute: str) -> ShardStub:
        endpoint = self.network.resolve(self.owner.shard_address(attribute))
        return ShardStub(self.network, endpoint)

    def client(self, client_id: str) -> Client:
        c = self.clients.get(client_id)
        if c is None:
            c = Client(client_id, self.client_keys[client_id], self.owner.params, self.owner.gamma,
                       self.owner.bulletin, self.network, self.owner.keyword_directory())
            self.clients[client_id] = c
        return c

    # -- owner operations delivered over the transport -------------------------

    def authorize(self, keyword: str, clients: Iterable[str]):
        return self.owner.authorize(keyword, clients)

    def update(self, keyword: str, op: Op, ids: Iterable[int]) -> None:
        msg = self.owner.make_update(keyword, op, ids)
        self.stub(self.owner.attribute_of[keyword]).update(msg.addr, msg.e_up)

    def update_mixed(self, keyword: str, added: Iterable[int], deleted: Iterable[int]) -> None:
        msg = self.owner.make_mixed_update(keyword, added, deleted)
        self.stub(self.owner.attribute_of[keyword]).update(msg.addr, msg.e_up)

    def revoke(self, keyword: str, remaining: Iterable[str]):
        tokens, swap = self.owner.revoke(keyword, remaining)
        self.stub(self.owner.attribute_of[keyword]).swap(swap.addr, swap.r_new)
        return tokens

    def search(self, client_id: str, keyword: str) -> list[int]:
        return self.client(client_id).search(keyword)

    def transcripts(self) -> dict[bytes, list[dict]]:
        return {s.shard_address: list(s.transcript) for s in self.shards.values()}

    def close(self) -> None:
        self.network.close()
        for svc in self._services:
            svc.stop()
        self._services.clear()

    def __enter__(self):
        return self

    def __exit__(self, *exc):
        self.close()
