"""Synthetic datasets and the timing runner behind ``sse-vault bench``."""

from __future__ import annotations

import csv
import logging
import math
import random
import statistics
import threading
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Optional, Sequence

from .bitmap import Op
from .cluster import Cluster
from .crypto import ch_setup
from .owner import Security, owner_init
from .server import ShardServer

log = logging.getLogger(__name__)

CSV_COLUMNS = ("op", "W", "D", "U", "mean_ms", "p95_ms")
OPS = ("edb_gen", "search", "update", "revoke")


@dataclass
class BenchConfig:
    words: Sequence[int] = (1000,)
    docs: Sequence[int] = (1000,)
    users: Sequence[int] = (100,)
    repetitions: int = 1000
    seed: int = 0
    output: Optional[Path] = None
    gnuplot: Optional[Path] = None
    transport: str = "inproc"

    def __post_init__(self):
        for name in ("words", "docs", "users"):
            grid = list(getattr(self, name))
            if not grid or min(grid) < 1:
                raise ValueError(f"{name} grid values must be >= 1")
            setattr(self, name, grid)
        if self.repetitions < 1:
            raise ValueError("repetitions must be >= 1")

    def grid(self):
        for w in self.words:
            for d in self.docs:
                for u in self.users:
                    yield w, d, u


@dataclass
class BenchRow:
    op: str
    W: int
    D: int
    U: int
    mean_ms: float
    p95_ms: float

    def as_csv(self) -> list:
        return [self.op, self.W, self.D, self.U, f"{self.mean_ms:.6f}", f"{self.p95_ms:.6f}"]


@dataclass
class StressResult:
    searches: int = 0
    mismatches: list[str] = field(default_factory=list)


def type_count(n_docs: int) -> int:
    return max(1, math.ceil(math.log2(n_docs))) if n_docs > 1 else 1


def synth_dataset(n_words: int, n_docs: int, seed: int = 0) -> tuple[dict[str, str], dict[str, set[int]]]:
    """Keywords get a random type i in [0, log2 |D|); type i matches files 0..|D|/2^i.

    The type doubles as the keyword's attribute, so each type lives on its own shard.
    """
    rng = random.Random(seed)
    n_types = type_count(n_docs)
    attribute_map, db = {}, {}
    for j in range(n_words):
        t = rng.randrange(n_types)
        w = f"w{j}"
        attribute_map[w] = f"type{t}"
        db[w] = set(range(min(n_docs, n_docs // 2 ** t + 1)))
    return attribute_map, db


def pair_count(db) -> int:
    return sum(len(ids) for ids in db.values())


def _summary(samples: list[float]) -> tuple[float, float]:
    ms = [s * 1000.0 for s in samples]
    if len(ms) == 1:
        return ms[0], ms[0]
    return statistics.fmean(ms), statistics.quantiles(ms, n=20, method="inclusive")[18]


def _timed(fn: Callable[[], object]) -> float:
    t0 = time.perf_counter()
    fn()
    return time.perf_counter() - t0


def bench_point(n_words: int, n_docs: int, n_users: int, repetitions: int, seed: int,
                chameleon, transport: str = "inproc", ops: Sequence[str] = OPS) -> list[BenchRow]:
    rng = random.Random(seed)
    attribute_map, db = synth_dataset(n_words, n_docs, seed)
    clients = [str(i) for i in range(1, n_users + 1)]
    owner, _, keys = owner_init(clients, attribute_map, gamma=n_docs, chameleon=chameleon, rng=rng)

    t0 = time.perf_counter()
    result = owner.build_edb(db)
    edb_time = time.perf_counter() - t0
    rows = []
    if "edb_gen" in ops:
        rows.append(BenchRow("edb_gen", n_words, n_docs, n_users, edb_time * 1000.0, edb_time * 1000.0))

    shards = {att: ShardServer(addr, owner.params) for att, addr in result.dht.items()}
    keywords = sorted(db)
    with Cluster(owner, keys, shards, transport) as cluster:
        for att, entries in result.shards.items():
            stub = cluster.stub(att)
            for addr in sorted(entries):
                stub.store(addr, entries[addr].r, entries[addr].e)
        for w in keywords:
            cluster.authorize(w, clients)

        if "search" in ops:
            samples = []
            for _ in range(repetitions):
                c, w = rng.choice(clients), rng.choice(keywords)
                samples.append(_timed(lambda: cluster.search(c, w)))
            rows.append(BenchRow("search", n_words, n_docs, n_users, *_summary(samples)))

        if "update" in ops:
            samples = []
            for _ in range(repetitions):
                w, i = rng.choice(keywords), rng.randrange(n_docs)
                op = Op.DELETE if i in owner.index[w] else Op.ADD
                samples.append(_timed(lambda: cluster.update(w, op, [i])))
            rows.append(BenchRow("update", n_words, n_docs, n_users, *_summary(samples)))

        if "revoke" in ops:
            samples = []
            for _ in range(repetitions):
                w = rng.choice(keywords)
                gone = rng.choice(clients)
                remaining = [c for c in clients if c != gone]
                samples.append(_timed(lambda: cluster.revoke(w, remaining)))
            rows.append(BenchRow("revoke", n_words, n_docs, n_users, *_summary(samples)))
    return rows


def stress_point(n_words: int, n_docs: int, n_users: int, repetitions: int, seed: int,
                 chameleon, transport: str = "inproc", threads: int = 8) -> StressResult:
    """Concurrent searches from distinct clients, checked against the owner's index."""
    attribute_map, db = synth_dataset(n_words, n_docs, seed)
    clients = [str(i) for i in range(1, n_users + 1)]
    result = StressResult()
    lock = threading.Lock()
    with Cluster.create(clients, attribute_map, db, gamma=n_docs, chameleon=chameleon,
                        rng=random.Random(seed), transport=transport) as cluster:
        keywords = sorted(db)
        for w in keywords:
            cluster.authorize(w, clients)
        for c in clients[:threads]:
            cluster.client(c)

        def worker(k: int):
            rng = random.Random(seed * 1_000_003 + k)
            client = cluster.clients[clients[k % len(clients)]]
            for _ in range(repetitions):
                w = rng.choice(keywords)
                got = client.search(w)
                want = sorted(cluster.owner.index[w])
                with lock:
                    result.searches += 1
                    if got != want:
                        result.mismatches.append(f"client {client.id} keyword {w}")

        pool = [threading.Thread(target=worker, args=(k,)) for k in range(min(threads, len(clients)))]
        for t in pool:
            t.start()
        for t in pool:
            t.join()
    return result


def write_gnuplot(rows: Sequence[BenchRow], path: Path) -> None:
    """One data block per op (select with ``index``), columns W D U mean p95."""
    with open(path, "w") as fh:
        for op in OPS:
            block = [r for r in rows if r.op == op and not math.isnan(r.mean_ms)]
            if not block:
                continue
            fh.write(f"# {op}\n# W D U mean_ms p95_ms\n")
            for r in block:
                fh.write(f"{r.W} {r.D} {r.U} {r.mean_ms:.6f} {r.p95_ms:.6f}\n")
            fh.write("\n\n")


def run_bench(config: BenchConfig, security: Security = Security(), chameleon=None,
              ops: Sequence[str] = OPS) -> list[BenchRow]:
    if chameleon is None:
        chameleon = ch_setup(security.lambda_p, security.lambda_q, random.Random(config.seed))
    rows: list[BenchRow] = []
    writer = None
    fh = None
    if config.output is not None:
        fh = open(config.output, "w", newline="")
        writer = csv.writer(fh)
        writer.writerow(CSV_COLUMNS)
    try:
        for w, d, u in config.grid():
            try:
                point = bench_point(w, d, u, config.repetitions, config.seed, chameleon, config.transport, ops)
            except MemoryError:
                log.error("grid point W=%d D=%d U=%d: out of memory", w, d, u)
                point = [BenchRow(op, w, d, u, math.nan, math.nan) for op in ops]
            rows.extend(point)
            if writer is not None:
                writer.writerows(r.as_csv() for r in point)
                fh.flush()
    finally:
        if fh is not None:
            fh.close()
    if config.gnuplot is not None:
        write_gnuplot(rows, config.gnuplot)
    return rows
