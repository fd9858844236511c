"""Seeded random scenarios replayed against a cluster and a plaintext oracle."""

from __future__ import annotations

import random
from dataclasses import dataclass, field

from .cluster import Cluster
from .errors import NotAuthorized, Rejected

OK, REJECTED, NOT_AUTHORIZED = "ok", "rejected", "not-authorized"


@dataclass
class ScenarioScript:
    seed: int
    gamma: int
    clients: list[str]
    attribute_map: dict[str, str]
    db: dict[str, set[int]]
    # ("authorize", w, clients) | ("revoke", w, remaining)
    # | ("update", w, added, deleted) | ("search", client, w, expected)
    commands: list[tuple] = field(default_factory=list)


@dataclass
class ScenarioResult:
    searches: int = 0
    deletion_checks: int = 0
    mismatches: list[str] = field(default_factory=list)


def random_script(seed: int, max_keywords: int = 16, max_files: int = 64, max_clients: int = 8,
                  max_ops: int = 200) -> ScenarioScript:
    """Generate commands together with the outcome a correct system must produce."""
    rng = random.Random(seed)
    clients = [str(i) for i in range(1, rng.randint(1, max_clients) + 1)]
    keywords = [f"w{i}" for i in range(rng.randint(1, max_keywords))]
    n_att = rng.randint(1, min(4, len(keywords)))
    attribute_map = {w: f"att{rng.randrange(n_att)}" for w in keywords}
    gamma = rng.randint(1, max_files)
    db = {w: {i for i in range(gamma) if rng.random() < 0.3} for w in keywords}
    script = ScenarioScript(seed, gamma, clients, attribute_map, {w: set(s) for w, s in db.items()})

    index = {w: set(s) for w, s in db.items()}
    authorized = {w: set() for w in keywords}
    cached: set[tuple[str, str]] = set()

    def search(c, w):
        if c in authorized[w]:
            expected = (OK, sorted(index[w]))
            cached.add((c, w))
        elif (c, w) in cached:
            expected = (REJECTED, None)
            cached.discard((c, w))
        else:
            expected = (NOT_AUTHORIZED, None)
        script.commands.append(("search", c, w, expected))

    n_ops = rng.randint(1, max_ops)
    while len(script.commands) < n_ops:
        w = rng.choice(keywords)
        roll = rng.random()
        if roll < 0.12 or not authorized[w] and roll < 0.3:
            extra = set(rng.sample(clients, rng.randint(1, len(clients))))
            authorized[w] |= extra
            script.commands.append(("authorize", w, sorted(authorized[w])))
        elif roll < 0.25:
            remaining = {c for c in authorized[w] if rng.random() < 0.6}
            authorized[w] = remaining
            script.commands.append(("revoke", w, sorted(remaining)))
        elif roll < 0.55:
            present, absent = sorted(index[w]), sorted(set(range(gamma)) - index[w])
            added = set(rng.sample(absent, min(len(absent), rng.randint(0, 3))))
            deleted = set(rng.sample(present, min(len(present), rng.randint(0, 3))))
            index[w] ^= added | deleted
            script.commands.append(("update", w, sorted(added), sorted(deleted)))
            if deleted and authorized[w] and len(script.commands) < n_ops:
                search(rng.choice(sorted(authorized[w])), w)
        else:
            search(rng.choice(clients), w)
    return script


def build_cluster(script: ScenarioScript, chameleon, transport: str = "inproc", **kwargs) -> Cluster:
    return Cluster.create(script.clients, script.attribute_map, script.db, gamma=script.gamma,
                          chameleon=chameleon, rng=random.Random(script.seed), transport=transport, **kwargs)


def run_script(script: ScenarioScript, cluster: Cluster) -> ScenarioResult:
    result = ScenarioResult()
    last_deleted: dict[str, set[int]] = {}
    for i, cmd in enumerate(script.commands):
        kind = cmd[0]
        if kind == "authorize":
            cluster.authorize(cmd[1], cmd[2])
        elif kind == "revoke":
            cluster.revoke(cmd[1], cmd[2])
        elif kind == "update":
            _, w, added, deleted = cmd
            cluster.update_mixed(w, added, deleted)
            last_deleted[w] = set(deleted)
        else:
            _, c, w, (want, want_ids) = cmd
            result.searches += 1
            try:
                got, ids = OK, cluster.search(c, w)
            except Rejected:
                got, ids = REJECTED, None
            except NotAuthorized:
                got, ids = NOT_AUTHORIZED, None
            if (got, ids) != (want, want_ids):
                result.mismatches.append(f"seed {script.seed} cmd {i}: search({c}, {w}) -> {got} {ids}, "
                                         f"expected {want} {want_ids}")
            if got == OK and last_deleted.get(w):
                result.deletion_checks += 1
                leaked = last_deleted[w] & set(ids)
                if leaked:
                    result.mismatches.append(f"seed {script.seed} cmd {i}: deleted ids {sorted(leaked)} returned")
            last_deleted.pop(w, None)
    return result
