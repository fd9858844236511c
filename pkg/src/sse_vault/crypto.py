"""Deterministic primitives: keyed PRF, hash-to-scalar and the discrete-log chameleon hash.

The PRF is HMAC-SHA256 run in counter mode.  ``prf`` returns one block the
size of the key (lambda bits); ``prf_expand`` returns arbitrarily long,
prefix-consistent output.  The chameleon hash is ``g^x * y^r mod p`` over an
order-q subgroup of Z*_p; the trapdoor ``xi`` (with ``y = g^xi``) lets its
holder find collisions.
"""

from __future__ import annotations

import hashlib
import hmac
import secrets
from dataclasses import dataclass

import gmpy2

from .errors import ParameterError

LAMBDA = 128
LAMBDA_Q = 160
LAMBDA_P = 1024

PARAMS_FORMAT = 0x01
_PRIME_ROUNDS = 40
_MAX_PRIME_TRIES = 200_000


def encode(*parts: bytes | str | int) -> bytes:
    """Injective framing of heterogeneous PRF inputs.

    Every part is prefixed with its 4-byte length, ints are 8-byte big-endian.
    """
    out = bytearray()
    for part in parts:
        if isinstance(part, str):
            part = part.encode()
        elif isinstance(part, int):
            part = part.to_bytes(8, "big")
        out += len(part).to_bytes(4, "big")
        out += part
    return bytes(out)


def _check_key(key: bytes) -> None:
    if not isinstance(key, (bytes, bytearray)) or len(key) < 16:
        raise ParameterError("PRF keys must be at least 16 bytes")


def prf_expand(key: bytes, data: bytes, out_len: int) -> bytes:
    """Counter-mode expansion: block i = HMAC-SHA256(key, i || data)."""
    if out_len < 1:
        raise ValueError("out_len must be positive")
    _check_key(key)
    blocks = []
    for ctr in range((out_len + 31) // 32):
        blocks.append(hmac.digest(key, ctr.to_bytes(4, "big") + data, "sha256"))
    return b"".join(blocks)[:out_len]


def prf(key: bytes, data: bytes) -> bytes:
    """One PRF block, the same length as the key."""
    return prf_expand(key, data, len(key))


def random_key(rng=None, nbytes: int = LAMBDA // 8) -> bytes:
    if rng is None:
        return secrets.token_bytes(nbytes)
    return rng.randbytes(nbytes)


def h1(q: int, data: bytes) -> int:
    """Hash onto Z*_q, i.e. [1, q-1]; 64 surplus bits keep the bias below 2^-64."""
    nbytes = (q.bit_length() + 64 + 7) // 8
    digest = hashlib.shake_256(b"H1" + data).digest(nbytes)
    return int.from_bytes(digest, "big") % (q - 1) + 1


def scalar_len(q: int) -> int:
    return (q.bit_length() + 7) // 8


@dataclass(frozen=True)
class ChameleonParams:
    p: int
    q: int
    g: int
    y: int

    def validate(self) -> None:
        check_group(self.p, self.q, self.g)
        if not 1 <= self.y < self.p or pow(self.y, self.q, self.p) != 1:
            raise ParameterError("public key is not in the order-q subgroup")

    def to_bytes(self) -> bytes:
        out = bytearray([PARAMS_FORMAT])
        for value in (self.p, self.q, self.g, self.y):
            raw = int_to_bytes(value)
            out += len(raw).to_bytes(2, "big") + raw
        return bytes(out)

    @classmethod
    def from_bytes(cls, data: bytes) -> ChameleonParams:
        if not data or data[0] != PARAMS_FORMAT:
            raise ParameterError("unknown chameleon parameter format")
        values = []
        pos = 1
        for _ in range(4):
            if pos + 2 > len(data):
                raise ParameterError("truncated chameleon parameters")
            n = int.from_bytes(data[pos:pos + 2], "big")
            pos += 2
            if pos + n > len(data):
                raise ParameterError("truncated chameleon parameters")
            values.append(int.from_bytes(data[pos:pos + n], "big"))
            pos += n
        if pos != len(data):
            raise ParameterError("trailing bytes after chameleon parameters")
        return cls(*values)


@dataclass(frozen=True)
class ChameleonTrapdoor:
    xi: int

    def matches(self, params: ChameleonParams) -> bool:
        return 1 <= self.xi < params.q and pow(params.g, self.xi, params.p) == params.y


def int_to_bytes(value: int) -> bytes:
    return value.to_bytes(max(1, (value.bit_length() + 7) // 8), "big")


def check_group(p: int, q: int, g: int) -> None:
    """Raise ParameterError unless g generates an order-q subgroup of Z*_p."""
    if q < 2 or p <= q or (p - 1) % q:
        raise ParameterError("q must divide p - 1")
    if not (gmpy2.is_prime(p, _PRIME_ROUNDS) and gmpy2.is_prime(q, _PRIME_ROUNDS)):
        raise ParameterError("p and q must be prime")
    if not 1 < g < p:
        raise ParameterError("g must lie in (1, p)")
    if pow(g, q, p) != 1:
        raise ParameterError("g does not have order q")


def _random_prime(bits: int, rng) -> int:
    for _ in range(_MAX_PRIME_TRIES):
        cand = rng.getrandbits(bits) | (1 << (bits - 1)) | 1
        if gmpy2.is_prime(cand, _PRIME_ROUNDS):
            return cand
    raise ParameterError(f"no {bits}-bit prime found")


def ch_setup(lambda_p: int = LAMBDA_P, lambda_q: int = LAMBDA_Q, rng=None):
    """Generate (params, trapdoor) with p = k*q + 1 of exactly lambda_p bits."""
    if not 2 <= lambda_q < lambda_p:
        raise ParameterError("need 2 <= lambda_q < lambda_p")
    rng = rng or secrets.SystemRandom()
    q = _random_prime(lambda_q, rng)
    lo = ((1 << (lambda_p - 1)) - 1) // q + 1
    hi = ((1 << lambda_p) - 2) // q
    if lo > hi:
        raise ParameterError("lambda_p too small for lambda_q")
    for _ in range(_MAX_PRIME_TRIES):
        k = rng.randint(lo, hi)
        k += k & 1  # p = kq + 1 odd needs k even
        if k > hi:
            continue
        p = k * q + 1
        if gmpy2.is_prime(p, _PRIME_ROUNDS):
            break
    else:
        raise ParameterError("no prime p = kq + 1 found")
    while True:
        h = rng.randint(2, p - 2)
        g = pow(h, (p - 1) // q, p)
        if g != 1:
            break
    xi = rng.randint(1, q - 1)
    params = ChameleonParams(p, q, g, pow(g, xi, p))
    return params, ChameleonTrapdoor(xi)


def ch_hash(params: ChameleonParams, x: int, r: int) -> int:
    p = params.p
    return int(gmpy2.powmod(params.g, x, p) * gmpy2.powmod(params.y, r, p) % p)


def ch_forge(params: ChameleonParams, trapdoor: ChameleonTrapdoor, x: int, x_new: int, r: int) -> int:
    """Solve x + xi*r = x_new + xi*r' (mod q) for r'."""
    q = params.q
    return (x - x_new + trapdoor.xi * r) * pow(trapdoor.xi, -1, q) % q
