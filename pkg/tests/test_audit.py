import random

import pytest

from sse_vault.audit import OP_UNKNOWN, audit_leakage, scan_frames
from sse_vault.bitmap import Op
from sse_vault.cluster import Cluster
from sse_vault.scenario import build_cluster, random_script, run_script
from sse_vault.server import ShardServer


class LeakyShard(ShardServer):
    """Negative control: an instrumented shard that also logs the plaintext op."""

    def apply_update(self, addr, e_up):
        super().apply_update(addr, e_up)
        self.transcript[-1]["op"] = "add"


def leaky_cluster(chameleon):
    honest = Cluster.create(["1", "2"], {"w": "a"}, {"w": {1}}, gamma=8, chameleon=chameleon, rng=random.Random(1))
    shards = {}
    for att, shard in honest.shards.items():
        leaky = LeakyShard(shard.shard_address, shard.params)
        leaky.entries, leaky.transcript, leaky.clock = dict(shard.entries), list(shard.transcript), shard.clock
        shards[att] = leaky
    return Cluster(honest.owner, honest.client_keys, shards)


class TestVerdicts:
    def test_empty(self):
        report = audit_leakage({})
        assert report.passed and report.verdict == "PASS"
        assert report.sp == {} and report.updates == {} and report.up_hist == {}

    @pytest.mark.parametrize("seed", range(5))
    def test_scenario_passes(self, chameleon, seed):
        script = random_script(seed)
        cluster = build_cluster(script, chameleon)
        run_script(script, cluster)
        report = audit_leakage(cluster.transcripts(), cluster.owner.time_db())
        assert report.verdict == "PASS", report.offences

    def test_leaky_fixture_fails(self, small_chameleon):
        c = leaky_cluster(small_chameleon)
        c.update("w", Op.ADD, [2])
        report = audit_leakage(c.transcripts())
        assert report.verdict == "FAIL"
        assert "['op']" in report.offences[0]

    @pytest.mark.parametrize("record,needle", [
        ({"ts": 1, "kind": "PEEK", "addr": 1}, "unknown kind"),
        ({"ts": 1, "kind": "SEARCH", "addr": 1}, "missing"),
        ({"ts": 1, "kind": "UPDATE", "addr": 1, "interval": [1, 3]}, "single state"),
        ({"ts": 1, "kind": "SEARCH", "addr": 1, "status": "OK", "keyword": "w"}, "beyond"),
    ])
    def test_offences(self, record, needle):
        report = audit_leakage({b"s": [record]})
        assert not report.passed and needle in report.offences[0]

    def test_timestamps_must_increase(self):
        recs = [{"ts": 2, "kind": "REVOKE", "addr": 1}, {"ts": 2, "kind": "REVOKE", "addr": 1}]
        assert "timestamp" in audit_leakage({b"s": recs}).offences[0]


class TestProfile:
    def test_search_pattern_and_updates(self, small_chameleon):
        c = Cluster.create(["1", "2"], {"w": "a", "v": "a"}, {"w": {1}, "v": set()}, gamma=8,
                           chameleon=small_chameleon, rng=random.Random(1))
        c.authorize("w", ["1", "2"])
        c.search("1", "w")
        c.update("w", Op.ADD, [3])
        c.search("2", "w")
        report = audit_leakage(c.transcripts(), c.owner.time_db())
        addr = c.owner.epochs["w"].addr
        assert list(report.sp) == [addr] and len(report.sp[addr]) == 2
        assert len(report.updates[addr]) == 1
        assert report.up_hist[addr] == [(report.updates[addr][0], OP_UNKNOWN)]
        assert [i for _, i in report.time_db["w"]] == [1, 3]
        assert report.sp[addr][0] < report.updates[addr][0] < report.sp[addr][1]

    def test_add_and_delete_look_alike(self, small_chameleon):
        c = Cluster.create(["1"], {"w": "a"}, {"w": {1}}, gamma=8, chameleon=small_chameleon, rng=random.Random(1))
        c.update("w", Op.ADD, [2])
        c.update("w", Op.DELETE, [1])
        recs = [r for r in c.transcripts()[c.owner.shard_address("a")] if r["kind"] == "UPDATE"]
        assert [set(r) for r in recs] == [{"ts", "kind", "addr", "interval"}] * 2


def test_no_secret_bytes_on_the_wire(chameleon):
    tap = []
    script = random_script(77)
    cluster = build_cluster(script, chameleon, tap=tap)
    run_script(script, cluster)
    owner = cluster.owner
    needles = {"master": owner.master}
    for c, k in cluster.client_keys.items():
        needles[f"k_id:{c}"] = k
    for w, e in owner.epochs.items():
        needles[f"k3:{w}"] = e.k3
        needles[f"k1:{w}"] = e.k1.to_bytes((e.k1.bit_length() + 7) // 8, "big")
        needles[f"r:{w}"] = e.r_secret.to_bytes((e.r_secret.bit_length() + 7) // 8, "big")
    for att in owner.dht_states:
        needles[f"k_att:{att}"] = owner.attribute_key(att)
        needles[f"k_dht:{att}"] = owner.dht_key(att)
    for v, key in owner.tree.node_keys.items():
        needles[f"node:{v}"] = key
    assert tap
    assert scan_frames(tap, needles) == []


def test_scan_frames_finds_planted_secret():
    assert scan_frames([b"abc", b"xxSECRETxx"], {"s": b"SECRET", "t": b"nope"}) == ["s"]
