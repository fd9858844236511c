import hashlib
import hmac
import random

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from sse_vault.crypto import (ChameleonParams, ChameleonTrapdoor, ch_forge, ch_hash, ch_setup, check_group,
                              encode, h1, prf, prf_expand, random_key, scalar_len)
from sse_vault.errors import ParameterError

KEY = bytes(range(16))
Q160 = 1461501637330902918203684832716283019655932542929  # largest prime below 2^160


def hmac_block(key, ctr, data):
    return hmac.new(key, ctr.to_bytes(4, "big") + data, hashlib.sha256).digest()


class TestEncode:
    def test_layout(self):
        assert encode("ab", 1) == b"\x00\x00\x00\x02ab" + b"\x00\x00\x00\x08" + (1).to_bytes(8, "big")

    @given(st.lists(st.binary(max_size=8), max_size=4), st.lists(st.binary(max_size=8), max_size=4))
    def test_injective(self, a, b):
        if a != b:
            assert encode(*a) != encode(*b)


class TestPrf:
    def test_golden_vectors(self):
        assert prf(KEY, encode("att1")).hex() == "fc7752c5d59b8783ded0c24458b2dc58"
        assert prf_expand(KEY, b"x", 40).hex() == (
            "8a9fea681966f8a5099733e18bb2337236fe46556adf4649a0a64ae2ca696732ad8d256b7d81018c")

    def test_matches_hmac_counter_mode(self):
        data = encode("att1")
        assert prf(KEY, data) == hmac_block(KEY, 0, data)[:16]
        assert prf_expand(KEY, data, 64) == hmac_block(KEY, 0, data) + hmac_block(KEY, 1, data)

    def test_output_length_follows_key(self):
        assert len(prf(bytes(32), b"")) == 32

    @given(st.binary(max_size=32), st.integers(1, 200), st.integers(1, 200))
    def test_prefix_consistent(self, data, a, b):
        short, long_ = sorted((a, b))
        assert prf_expand(KEY, data, long_)[:short] == prf_expand(KEY, data, short)

    def test_short_key_rejected(self):
        with pytest.raises(ParameterError):
            prf(b"short", b"x")

    def test_random_key_seeded(self):
        assert random_key(random.Random(1)) == random_key(random.Random(1))
        assert len(random_key(nbytes=24)) == 24


class TestH1:
    def test_golden(self):
        assert h1(Q160, b"w1") == 1041527980103995932512941970204794618914403183623

    @given(st.binary(max_size=64))
    def test_range(self, data):
        assert 1 <= h1(Q160, data) <= Q160 - 1

    def test_tiny_modulus_never_zero(self):
        assert {h1(11, bytes([i])) for i in range(200)} <= set(range(1, 11))


class TestChameleonTiny:
    def test_worked_vectors(self, tiny):
        params, td = tiny
        assert ch_hash(params, 5, 2) == 1
        assert ch_forge(params, td, 5, 7, 2) == 5
        assert ch_hash(params, 7, 5) == 1

    def test_hand_computed(self, tiny):
        # 2^5 * 8^2 = 32 * 64 = 2048 = 89*23 + 1
        assert 2 ** 5 * 8 ** 2 % 23 == 1

    def test_trapdoor_matches(self, tiny):
        params, td = tiny
        assert td.matches(params)
        assert not ChameleonTrapdoor(4).matches(params)

    @given(st.integers(0, 10), st.integers(0, 10), st.integers(0, 10))
    def test_every_forge_collides(self, tiny, x, x_new, r):
        params, td = tiny
        assert ch_hash(params, x_new, ch_forge(params, td, x, x_new, r)) == ch_hash(params, x, r)


class TestChameleonGroup:
    def test_setup_sizes(self, chameleon):
        params, td = chameleon
        assert params.p.bit_length() == 1024
        assert params.q.bit_length() == 160
        params.validate()
        assert td.matches(params)

    @settings(max_examples=50, deadline=None)
    @given(st.data())
    def test_forge_collision(self, chameleon, data):
        params, td = chameleon
        x, x_new, r = (data.draw(st.integers(1, params.q - 1)) for _ in range(3))
        r_new = ch_forge(params, td, x, x_new, r)
        assert ch_hash(params, x_new, r_new) == ch_hash(params, x, r)
        assert ch_hash(params, x, r) == pow(params.g, x, params.p) * pow(params.y, r, params.p) % params.p

    def test_params_roundtrip(self, chameleon):
        params, _ = chameleon
        assert ChameleonParams.from_bytes(params.to_bytes()) == params

    @pytest.mark.parametrize("mutate", [lambda b: b[:-1], lambda b: b + b"\x00", lambda b: b"\x02" + b[1:], lambda b: b""])
    def test_params_decode_errors(self, chameleon, mutate):
        with pytest.raises(ParameterError):
            ChameleonParams.from_bytes(mutate(chameleon[0].to_bytes()))

    @pytest.mark.parametrize("p,q,g", [(23, 7, 2), (22, 11, 2), (23, 11, 5), (23, 11, 1)])
    def test_check_group_rejects(self, p, q, g):
        with pytest.raises(ParameterError):
            check_group(p, q, g)

    def test_setup_deterministic_under_seed(self):
        assert ch_setup(128, 32, random.Random(3)) == ch_setup(128, 32, random.Random(3))

    def test_setup_rejects_bad_sizes(self):
        with pytest.raises(ParameterError):
            ch_setup(64, 64)

    def test_scalar_len(self):
        assert scalar_len(Q160) == 20


class TestSmallFacts:
    def test_prf_input_sensitivity(self):
        assert prf(KEY, b"m") == prf(KEY, b"m")
        assert prf(KEY, b"m") != prf(KEY, b"m\x00")

    def test_expand_single_block(self):
        assert prf_expand(KEY, b"z", 16) == hmac_block(KEY, 0, b"z")[:16]

    def test_h1_never_zero_bulk(self):
        q = 11
        assert all(h1(q, i.to_bytes(4, "big")) != 0 for i in range(100_000))

    def test_tiny_group_valid(self):
        check_group(23, 11, 2)
        assert pow(2, 11, 23) == 1

    def test_identity_exponents(self, tiny):
        assert ch_hash(tiny[0], 0, 0) == 1

    def test_identity_collision(self, tiny):
        params, td = tiny
        assert all(ch_forge(params, td, x, x, r) == r for x in range(11) for r in range(11))

    def test_hash_deterministic(self, chameleon):
        assert ch_hash(chameleon[0], 12345, 678) == ch_hash(chameleon[0], 12345, 678)
