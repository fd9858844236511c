"""Command-line front end.

State lives in a data directory (``--data-dir`` or ``$SSE_VAULT_DATA_DIR``):

    owner.ssev          owner secrets and bookkeeping (with a bulletin copy)
    bulletin.ssev       public tokens, readable by every client
    public.json         group parameters, bitmap capacity, keyword directory
    clients/<id>.key    each client's secret key, hex
    shards/<addr>.ssev  one file per shard

Exit codes: 0 success, 2 protocol rejection, 1 any other error.
"""

from __future__ import annotations

import argparse
import json
import logging
import random
import signal
import sys
import threading
from pathlib import Path
from typing import Optional, Sequence

from .audit import audit_leakage
from .bench import BenchConfig, run_bench, stress_point
from .bulletin import Bulletin
from .client import Client
from .crypto import LAMBDA_P, LAMBDA_Q, ChameleonParams, ch_setup
from .errors import NotAuthorized, Rejected, SSEError
from .owner import DataOwner, Security, owner_init
from .persist import (ENV_DATA_DIR, data_dir, load_bulletin, load_owner, load_shard, persist_bulletin,
                      persist_owner, persist_shard, write_file)
from .server import ShardServer
from .transport import (InProcNetwork, Registry, ShardStub, TcpNetwork, TcpRegistryService,
                        TcpShardService)

log = logging.getLogger("sse_vault")

EXIT_OK, EXIT_ERROR, EXIT_REJECTED = 0, 1, 2


class Workspace:
    def __init__(self, root: Path):
        self.root = Path(root)

    owner_file = property(lambda self: self.root / "owner.ssev")
    bulletin_file = property(lambda self: self.root / "bulletin.ssev")
    public_file = property(lambda self: self.root / "public.json")
    shard_dir = property(lambda self: self.root / "shards")

    def require(self) -> None:
        if not self.owner_file.exists():
            raise SSEError(f"no state in {self.root}; run setup first")

    def key_file(self, client: str) -> Path:
        return self.root / "clients" / f"{client}.key"

    def shard_file(self, shard_address: bytes) -> Path:
        return self.shard_dir / f"{shard_address.hex()}.ssev"

    # -- owner side ------------------------------------------------------------

    def load_owner(self) -> DataOwner:
        self.require()
        return load_owner(self.owner_file.read_bytes())

    def save_owner(self, owner: DataOwner) -> None:
        write_file(self.owner_file, persist_owner(owner))
        write_file(self.bulletin_file, persist_bulletin(owner.bulletin))
        public = {"params": owner.params.to_bytes().hex(), "gamma": owner.gamma,
                  "directory": {w: label.hex() for w, label in sorted(owner.keyword_directory().items())}}
        write_file(self.public_file, json.dumps(public, indent=1, sort_keys=True).encode())

    # -- shards ---------------------------------------------------------------

    def load_shards(self) -> list[ShardServer]:
        if not self.shard_dir.exists():
            return []
        return [load_shard(p.read_bytes()) for p in sorted(self.shard_dir.glob("*.ssev"))]

    def save_shard(self, shard: ShardServer) -> None:
        write_file(self.shard_file(shard.shard_address), persist_shard(shard))

    # -- client side ------------------------------------------------------------

    def public(self) -> dict:
        self.require()
        return json.loads(self.public_file.read_text())

    def load_bulletin(self) -> Bulletin:
        return load_bulletin(self.bulletin_file.read_bytes())

    def client_key(self, client: str) -> bytes:
        path = self.key_file(client)
        if not path.exists():
            raise SSEError(f"no key for client {client!r}")
        return bytes.fromhex(path.read_text().strip())


class Session:
    """A network view over the workspace: in-process shards loaded from disk, or a TCP registry."""

    def __init__(self, ws: Workspace, transport: str, registry: Optional[str]):
        self.ws = ws
        self.shards: list[ShardServer] = []
        if transport == "tcp":
            if not registry:
                raise SSEError("--transport tcp needs --registry host:port")
            self.network = TcpNetwork(registry)
        else:
            self.network = InProcNetwork()
            self.shards = ws.load_shards()
            for shard in self.shards:
                self.network.attach(shard)

    def stub(self, owner: DataOwner, attribute: str) -> ShardStub:
        endpoint = self.network.resolve(owner.shard_address(attribute))
        if endpoint is None:
            raise SSEError(f"shard for attribute {attribute!r} is not registered")
        return ShardStub(self.network, endpoint)

    def commit(self) -> None:
        for shard in self.shards:
            self.ws.save_shard(shard)
        self.network.close()


def _csv_list(text: str) -> list[str]:
    return [t.strip() for t in text.split(",") if t.strip()]


def _int_list(text: str) -> list[int]:
    return [int(t) for t in _csv_list(text)]


def _emit(obj) -> None:
    print(json.dumps(obj, sort_keys=True))


# -- commands -----------------------------------------------------------------

def cmd_setup(args, ws: Workspace) -> int:
    if ws.owner_file.exists() and not args.force:
        raise SSEError(f"{ws.root} already holds state; pass --force to overwrite")
    rng = random.Random(args.seed) if args.seed is not None else None
    clients = [str(i) for i in range(1, args.clients + 1)]
    keywords = _csv_list(args.keywords)
    if not keywords:
        raise SSEError("--keywords is empty")
    attrs = dict(a.split("=", 1) for a in args.attribute)
    attribute_map = {w: attrs.get(w, "default") for w in keywords}
    if args.db:
        db = {w: set(ids) for w, ids in json.loads(Path(args.db).read_text()).items()}
    else:
        pick = rng or random.Random()
        db = {w: {i for i in range(args.gamma) if pick.random() < args.density} for w in keywords}
    security = Security(lambda_q=args.lambda_q, lambda_p=args.lambda_p)
    chameleon = ch_setup(security.lambda_p, security.lambda_q, rng)
    owner, _, keys = owner_init(clients, attribute_map, gamma=args.gamma, security=security,
                                chameleon=chameleon, rng=rng)
    edb = owner.build_edb(db)
    if not args.no_authorize:
        for w in keywords:
            owner.authorize(w, clients)
    for att, addr in edb.dht.items():
        shard = ShardServer(addr, owner.params)
        for a in sorted(edb.shards[att]):
            shard.store_entry(a, edb.shards[att][a])
        ws.save_shard(shard)
    for c, k in keys.items():
        write_file(ws.key_file(c), k.hex().encode() + b"\n")
    ws.save_owner(owner)
    _emit({"clients": len(clients), "gamma": args.gamma, "shards": len(edb.dht),
           "index": {w: sorted(ids) for w, ids in sorted(db.items())}})
    return EXIT_OK


def cmd_authorize(args, ws: Workspace) -> int:
    owner = ws.load_owner()
    tokens = owner.authorize(args.keyword, _csv_list(args.clients))
    ws.save_owner(owner)
    _emit({"keyword": args.keyword, "authorized": sorted(owner.authorized[args.keyword]),
           "tokens": len(tokens)})
    return EXIT_OK


def cmd_update(args, ws: Workspace) -> int:
    owner = ws.load_owner()
    session = Session(ws, args.transport, args.registry)
    msg = owner.make_mixed_update(args.keyword, _int_list(args.add), _int_list(args.delete))
    session.stub(owner, owner.attribute_of[args.keyword]).update(msg.addr, msg.e_up)
    session.commit()
    ws.save_owner(owner)
    _emit({"keyword": args.keyword, "ids": sorted(owner.index[args.keyword])})
    return EXIT_OK


def cmd_revoke(args, ws: Workspace) -> int:
    owner = ws.load_owner()
    session = Session(ws, args.transport, args.registry)
    tokens, swap = owner.revoke(args.keyword, _csv_list(args.keep))
    session.stub(owner, owner.attribute_of[args.keyword]).swap(swap.addr, swap.r_new)
    session.commit()
    ws.save_owner(owner)
    _emit({"keyword": args.keyword, "authorized": sorted(owner.authorized[args.keyword]),
           "tokens": len(tokens)})
    return EXIT_OK


def cmd_search(args, ws: Workspace) -> int:
    public = ws.public()
    session = Session(ws, args.transport, args.registry)
    directory = {w: bytes.fromhex(v) for w, v in public["directory"].items()}
    client = Client(args.client, ws.client_key(args.client), ChameleonParams.from_bytes(bytes.fromhex(public["params"])),
                    public["gamma"], ws.load_bulletin(), session.network, directory)
    if args.fetch:
        blobs = client.fetch(args.keyword)
        ids = sorted(blobs)
    else:
        ids = client.search(args.keyword)
    session.commit()
    _emit({"client": args.client, "keyword": args.keyword, "ids": ids})
    return EXIT_OK


def cmd_audit(args, ws: Workspace) -> int:
    owner = ws.load_owner()
    report = audit_leakage({s.shard_address: s.transcript for s in ws.load_shards()}, owner.time_db())
    for line in report.offences:
        print(line, file=sys.stderr)
    _emit({"verdict": report.verdict, "searched_addresses": len(report.sp),
           "updated_addresses": len(report.updates), "offences": len(report.offences)})
    return EXIT_OK if report.passed else EXIT_ERROR


def cmd_serve(args, ws: Workspace) -> int:
    shards = ws.load_shards()
    if not shards:
        raise SSEError(f"no shards in {ws.shard_dir}")
    registry = TcpRegistryService(Registry(), args.host, args.port).start()
    services = []
    for shard in shards:
        svc = TcpShardService(shard, args.host, 0, on_change=ws.save_shard).start()
        registry.registry.register(shard.shard_address, svc.endpoint)
        services.append(svc)
    print(f"registry listening on {registry.endpoint} ({len(services)} shards)", flush=True)
    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        stop.wait()
    except KeyboardInterrupt:
        pass
    for svc in services:
        svc.stop()
        ws.save_shard(svc.shard)
    registry.stop()
    return EXIT_OK


def cmd_bench(args, ws: Workspace) -> int:
    seed = args.seed if args.seed is not None else 0
    config = BenchConfig(_int_list(args.words), _int_list(args.docs), _int_list(args.users),
                         args.repetitions, seed, Path(args.output) if args.output else None,
                         Path(args.gnuplot) if args.gnuplot else None, args.transport)
    chameleon = ch_setup(args.lambda_p, args.lambda_q, random.Random(seed))
    if args.stress:
        failures = 0
        for w, d, u in config.grid():
            result = stress_point(w, d, u, config.repetitions, seed, chameleon, args.transport, args.threads)
            failures += len(result.mismatches)
            _emit({"W": w, "D": d, "U": u, "searches": result.searches, "mismatches": len(result.mismatches)})
        return EXIT_OK if failures == 0 else EXIT_ERROR
    rows = run_bench(config, chameleon=chameleon)
    if config.output is None:
        print("op,W,D,U,mean_ms,p95_ms")
        for r in rows:
            print(",".join(str(v) for v in r.as_csv()))
    return EXIT_OK


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--data-dir", default=None, help=f"state directory (default ${ENV_DATA_DIR} or ./sse-data)")
    common.add_argument("--seed", type=int, default=None, help="seed for reproducible runs")
    common.add_argument("--transport", choices=("inproc", "tcp"), default="inproc")
    common.add_argument("--registry", default=None, metavar="HOST:PORT", help="registry endpoint for tcp")
    common.add_argument("-v", "--verbose", action="store_true")

    group = argparse.ArgumentParser(add_help=False)
    group.add_argument("--gamma", type=int, default=1024, help="bitmap capacity (max file id + 1)")
    group.add_argument("--lambda-q", type=int, default=LAMBDA_Q)
    group.add_argument("--lambda-p", type=int, default=LAMBDA_P)

    parser = argparse.ArgumentParser(prog="sse-vault", description="Multi-client dynamic searchable encryption.")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("setup", parents=[common, group], help="generate keys and the encrypted index")
    p.add_argument("--clients", type=int, required=True)
    p.add_argument("--keywords", required=True, help="comma separated")
    p.add_argument("--attribute", action="append", default=[], metavar="KEYWORD=ATTR")
    p.add_argument("--db", help="JSON file mapping keyword to file ids")
    p.add_argument("--density", type=float, default=0.3, help="match probability for a random index")
    p.add_argument("--no-authorize", action="store_true", help="leave every keyword unauthorized")
    p.add_argument("--force", action="store_true")
    p.set_defaults(func=cmd_setup)

    p = sub.add_parser("authorize", parents=[common], help="grant a keyword to clients")
    p.add_argument("--keyword", required=True)
    p.add_argument("--clients", required=True, help="comma separated client ids")
    p.set_defaults(func=cmd_authorize)

    p = sub.add_parser("search", parents=[common], help="search as a client")
    p.add_argument("--client", required=True)
    p.add_argument("--keyword", required=True)
    p.add_argument("--fetch", action="store_true", help="also fetch matching blobs")
    p.set_defaults(func=cmd_search)

    p = sub.add_parser("update", parents=[common], help="add or delete file ids for a keyword")
    p.add_argument("--keyword", required=True)
    p.add_argument("--add", default="")
    p.add_argument("--delete", default="")
    p.set_defaults(func=cmd_update)

    p = sub.add_parser("revoke", parents=[common], help="rotate a keyword's keys to a smaller group")
    p.add_argument("--keyword", required=True)
    p.add_argument("--keep", required=True, help="comma separated ids that stay authorized; may be empty")
    p.set_defaults(func=cmd_revoke)

    p = sub.add_parser("audit", parents=[common], help="check shard transcripts against the leakage profile")
    p.set_defaults(func=cmd_audit)

    p = sub.add_parser("serve", parents=[common], help="serve the shards over TCP")
    p.add_argument("--host", default="127.0.0.1")
    p.add_argument("--port", type=int, default=7700)
    p.set_defaults(func=cmd_serve)

    p = sub.add_parser("bench", parents=[common, group], help="time operations over a parameter grid")
    p.add_argument("--words", default="1000")
    p.add_argument("--docs", default="1000")
    p.add_argument("--users", default="100")
    p.add_argument("--repetitions", type=int, default=1000)
    p.add_argument("--output", help="CSV path (default stdout)")
    p.add_argument("--gnuplot", help="also write gnuplot data blocks here")
    p.add_argument("--stress", action="store_true", help="concurrent searches, correctness only")
    p.add_argument("--threads", type=int, default=8)
    p.set_defaults(func=cmd_bench)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    ws = Workspace(Path(args.data_dir) if args.data_dir else data_dir())
    try:
        return args.func(args, ws)
    except (Rejected, NotAuthorized) as exc:
        print(f"rejected: {exc}", file=sys.stderr)
        return EXIT_REJECTED
    except (SSEError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
