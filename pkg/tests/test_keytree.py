import random
from itertools import combinations

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sse_vault.errors import IntegrityError, StateError
from sse_vault.keytree import (PathKey, common_cover_key, make_path_token, node_key, path_key, recover_path_key,
                               roots_subtrees, tree_build)

MASTER = bytes(16)


def brute_cover(tree, authorized):
    """Nodes whose leaves are all authorized while their parent's leaves are not."""
    leaves = {tree.leaf_of[c] for c in authorized}

    def full(v):
        return set(tree.leaves_under(v)) <= leaves

    return {v for v in range(1, 2 * tree.leaf_count) if full(v) and (v == 1 or not full(v // 2))}


class TestTree:
    def test_path_of_sixth_client(self):
        tree = tree_build(MASTER, [str(i) for i in range(1, 9)])
        assert tree.path_nodes("6") == [1, 3, 6, 13]

    def test_shape(self):
        tree = tree_build(MASTER, list("abcde"))
        assert tree.height == 3 and tree.leaf_count == 8
        assert tree.leaf_of == {"a": 8, "b": 9, "c": 10, "d": 11, "e": 12}
        assert len(tree.node_keys) == 15

    def test_single_client(self):
        tree = tree_build(MASTER, ["solo"])
        assert tree.path_nodes("solo") == [1]
        assert roots_subtrees(tree, ["solo"]) == {1}

    def test_node_keys_distinct(self):
        tree = tree_build(MASTER, [str(i) for i in range(16)])
        assert len(set(tree.node_keys.values())) == 31
        assert tree.node_keys[5] == node_key(MASTER, 5)

    @pytest.mark.parametrize("clients", [[], ["a", "a"]])
    def test_build_errors(self, clients):
        with pytest.raises(ValueError):
            tree_build(MASTER, clients)

    def test_unknown_client(self):
        with pytest.raises(StateError):
            tree_build(MASTER, ["a"]).path_nodes("b")


class TestCover:
    def test_all_subsets_of_eight(self):
        clients = [str(i) for i in range(1, 9)]
        tree = tree_build(MASTER, clients)
        for k in range(1, 9):
            for group in combinations(clients, k):
                cover = roots_subtrees(tree, group)
                assert cover == brute_cover(tree, group)
                covered = set().union(*(tree.leaves_under(v) for v in cover))
                assert covered == {tree.leaf_of[c] for c in group}

    def test_full_group_is_root(self):
        clients = [str(i) for i in range(8)]
        assert roots_subtrees(tree_build(MASTER, clients), clients) == {1}

    def test_partial_tree_excludes_empty_leaves(self):
        tree = tree_build(MASTER, list("abcde"))
        assert roots_subtrees(tree, "abcde") == {2, 12}

    @given(st.integers(1, 40), st.data())
    def test_matches_brute_force(self, n, data):
        clients = [f"c{i}" for i in range(n)]
        tree = tree_build(MASTER, clients)
        group = data.draw(st.sets(st.sampled_from(clients), min_size=1))
        assert roots_subtrees(tree, group) == brute_cover(tree, group)

    @given(st.integers(1, 40), st.data())
    def test_members_share_exactly_one_node(self, n, data):
        clients = [f"c{i}" for i in range(n)]
        tree = tree_build(MASTER, clients)
        group = data.draw(st.sets(st.sampled_from(clients), min_size=1))
        cover = roots_subtrees(tree, group)
        for c in clients:
            shared = set(tree.path_nodes(c)) & cover
            assert len(shared) == (1 if c in group else 0)

    def test_errors(self):
        tree = tree_build(MASTER, ["a", "b"])
        with pytest.raises(ValueError):
            roots_subtrees(tree, [])
        with pytest.raises(StateError):
            roots_subtrees(tree, ["z"])


class TestPathToken:
    def test_roundtrip(self):
        tree = tree_build(MASTER, [str(i) for i in range(8)])
        pk = path_key(tree, "3")
        k_id = bytes(range(16))
        token = make_path_token(pk, k_id, random.Random(1))
        assert len(token.label) == 16
        assert recover_path_key(token, k_id) == pk

    def test_wrong_key_fails_validation(self):
        tree = tree_build(MASTER, [str(i) for i in range(8)])
        token = make_path_token(path_key(tree, "3"), bytes(16), random.Random(1))
        with pytest.raises(IntegrityError):
            recover_path_key(token, bytes([1] * 16))

    def test_common_cover_key(self):
        tree = tree_build(MASTER, [str(i) for i in range(8)])
        pk = path_key(tree, "5")  # leaf 13
        assert common_cover_key(pk, {2, 6}) == (6, tree.node_keys[6])
        assert common_cover_key(pk, {2}) is None

    @pytest.mark.parametrize("raw", [b"", b"\x00\x00", b"\x00\x02" + b"\x00" * 21,
                                     b"\x00\x01" + b"\x00\x00\x00\x02" + bytes(16)])
    def test_from_bytes_rejects(self, raw):
        with pytest.raises(IntegrityError):
            PathKey.from_bytes(raw)

    def test_broken_chain(self):
        bad = PathKey(((1, bytes(16)), (5, bytes(16))))
        with pytest.raises(IntegrityError):
            PathKey.from_bytes(bad.to_bytes())


@pytest.fixture(scope="module")
def tree():
    return tree_build(MASTER, [str(i) for i in range(1, 9)])


class TestPinnedExamples:
    def test_first_client_path(self, tree):
        assert tree.path_nodes("1") == [1, 2, 4, 8]
        assert tree.height == 3 and len(tree.node_keys) == 15

    def test_group_cover(self, tree):
        assert roots_subtrees(tree, {"1", "2", "3", "4", "7", "8"}) == {2, 7}

    def test_common_key_for_member(self, tree):
        assert common_cover_key(path_key(tree, "4"), {2, 7}) == (2, tree.node_keys[2])

    def test_no_common_key_for_outsider(self, tree):
        assert common_cover_key(path_key(tree, "5"), {2, 7}) is None

    def test_root_cover(self, tree):
        assert all(common_cover_key(path_key(tree, c), {1}) == (1, tree.node_keys[1]) for c in tree.clients)

    def test_single_client_is_leaf(self, tree):
        assert roots_subtrees(tree, {"5"}) == {12}


class TestCoverInvariants:
    @given(st.integers(1, 1024), st.data())
    def test_exact_and_minimal(self, n, data):
        clients = [str(i) for i in range(n)]
        tree = tree_build(MASTER, clients)
        group = data.draw(st.sets(st.sampled_from(clients), min_size=1, max_size=64))
        cover = roots_subtrees(tree, group)
        leaves = set().union(*(tree.leaves_under(v) for v in cover))
        assert leaves == {tree.leaf_of[c] for c in group}
        assert all(v ^ 1 not in cover for v in cover if v > 1)
        for a in cover:
            anc = a // 2
            while anc:
                assert anc not in cover
                anc //= 2
        assert len(cover) <= len(group)

    def test_full_subtree_is_one_node(self):
        tree = tree_build(MASTER, [str(i) for i in range(16)])
        assert roots_subtrees(tree, {str(i) for i in range(4, 8)}) == {5}

    @pytest.mark.parametrize("n", [1, 2, 3, 5, 8, 13])
    def test_authorization_sound_and_complete_exhaustive(self, n):
        clients = [str(i) for i in range(n)]
        tree = tree_build(MASTER, clients)
        for k in range(1, n + 1):
            for group in combinations(clients, k):
                cover = roots_subtrees(tree, group)
                for c in clients:
                    assert (common_cover_key(path_key(tree, c), cover) is not None) == (c in group)

    @settings(max_examples=30)
    @given(st.integers(17, 64), st.data())
    def test_authorization_sound_and_complete_large(self, n, data):
        clients = [str(i) for i in range(n)]
        tree = tree_build(MASTER, clients)
        group = data.draw(st.sets(st.sampled_from(clients), min_size=1))
        cover = roots_subtrees(tree, group)
        for c in clients:
            assert (common_cover_key(path_key(tree, c), cover) is not None) == (c in group)


def test_path_token_labels_distinct():
    tree = tree_build(MASTER, [str(i) for i in range(8)])
    pk, k_id, rng = path_key(tree, "2"), bytes(range(16)), random.Random(0)
    tokens = [make_path_token(pk, k_id, rng) for _ in range(1000)]
    assert len({t.label for t in tokens}) == 1000
    assert len({t.mask_output for t in tokens}) == 1000


def test_token_roundtrip_every_client():
    clients = [str(i) for i in range(11)]
    tree = tree_build(MASTER, clients)
    rng = random.Random(1)
    for c in clients:
        k_id = rng.randbytes(16)
        assert recover_path_key(make_path_token(path_key(tree, c), k_id, rng), k_id) == path_key(tree, c)
