"""Keys, addresses and recoverable ECDSA signatures over secp256k1.

Digests are keccak256, addresses are the last 20 bytes of the keccak256 of
the 64-byte uncompressed public key, and signatures carry a recovery id so
that the signer's address can be recomputed from (digest, signature) alone.
The curve and hash kernels come from :mod:`edgetoll._backend`.
"""

from __future__ import annotations

import hmac
import secrets
from dataclasses import dataclass, field
from functools import cached_property, lru_cache

from edgetoll import _backend

CURVE_P = 2**256 - 2**32 - 977
CURVE_N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
HALF_N = CURVE_N // 2

ZERO_SALT = bytes(32)

try:
    from gmpy2 import invert as _gmp_invert

    def _inv_n(x: int) -> int:
        return int(_gmp_invert(x, CURVE_N))
except ImportError:  # optional speedup only
    def _inv_n(x: int) -> int:
        return pow(x, -1, CURVE_N)


class CryptoError(ValueError):
    """Malformed key, point, or signature."""


class RecoveryError(CryptoError):
    """The (digest, signature) pair does not recover to any public key."""


class _FixedBytes(bytes):
    size = 0

    def __new__(cls, value):
        if type(value) is cls:
            return value
        if isinstance(value, str):
            text = value[2:] if value[:2] in ("0x", "0X") else value
            try:
                value = bytes.fromhex(text)
            except ValueError as exc:
                raise CryptoError(f"invalid hex for {cls.__name__}: {value!r}") from exc
        value = bytes(value)
        if len(value) != cls.size:
            raise CryptoError(f"{cls.__name__} must be {cls.size} bytes, got {len(value)}")
        return super().__new__(cls, value)

    def __str__(self) -> str:
        return "0x" + self.hex()

    def __repr__(self) -> str:
        return f"{type(self).__name__}('0x{self.hex()}')"


class Address(_FixedBytes):
    """20-byte account identifier."""

    size = 20


class Digest(_FixedBytes):
    """32-byte keccak256 output."""

    size = 32


def keccak256(data: bytes) -> Digest:
    return Digest(_backend.keccak256(data))


def _pub_bytes(public: tuple[int, int]) -> bytes:
    return public[0].to_bytes(32, "big") + public[1].to_bytes(32, "big")


def derive_address(public_key) -> Address:
    """Address of an affine public key ``(x, y)`` or its 64/65-byte encoding."""
    if isinstance(public_key, (bytes, bytearray)):
        raw = bytes(public_key)
        if len(raw) == 65 and raw[0] == 4:
            raw = raw[1:]
        if len(raw) != 64:
            raise CryptoError("public key must be 64 raw or 65 uncompressed bytes")
        public_key = (int.from_bytes(raw[:32], "big"), int.from_bytes(raw[32:], "big"))
    x, y = public_key
    if not (0 <= x < CURVE_P and 0 <= y < CURVE_P) or (y * y - x * x * x - 7) % CURVE_P:
        raise CryptoError("public key is not a point on secp256k1")
    return Address(_backend.keccak256(_pub_bytes((x, y)))[12:])


@dataclass(frozen=True)
class KeyPair:
    secret: int = field(repr=False)
    public: tuple[int, int]

    @classmethod
    def from_secret(cls, secret) -> KeyPair:
        if isinstance(secret, (bytes, bytearray)):
            secret = int.from_bytes(secret, "big")
        if not 1 <= secret < CURVE_N:
            raise CryptoError("secret scalar out of range [1, n)")
        return cls(secret, _backend.base_mul(secret))

    @classmethod
    def generate(cls, rng=None) -> KeyPair:
        """Fresh key; ``rng`` is anything with ``randrange`` (e.g. random.Random)."""
        if rng is None:
            return cls.from_secret(secrets.randbelow(CURVE_N - 1) + 1)
        return cls.from_secret(rng.randrange(1, CURVE_N))

    @classmethod
    def from_seed(cls, *parts) -> KeyPair:
        """Deterministic key from arbitrary labels, for reproducible runs."""
        material = "/".join(str(p) for p in parts).encode()
        counter = 0
        while True:
            k = int.from_bytes(_backend.keccak256(material + counter.to_bytes(4, "big")), "big")
            if 1 <= k < CURVE_N:
                return cls.from_secret(k)
            counter += 1

    @cached_property
    def address(self) -> Address:
        return derive_address(self.public)


@dataclass(frozen=True, slots=True)
class Signature:
    r: int
    s: int
    v: int

    def __post_init__(self):
        if not (0 < self.r < CURVE_N and 0 < self.s < CURVE_N):
            raise CryptoError("r and s must lie in [1, n)")
        if self.v not in (0, 1):
            raise CryptoError("recovery id must be 0 or 1")

    @property
    def is_canonical(self) -> bool:
        return self.s <= HALF_N

    def to_bytes(self) -> bytes:
        return self.r.to_bytes(32, "big") + self.s.to_bytes(32, "big") + bytes([self.v])

    @classmethod
    def from_bytes(cls, raw: bytes) -> Signature:
        raw = bytes(raw)
        if len(raw) != 65:
            raise CryptoError("signature must be 65 bytes (r || s || v)")
        return cls(int.from_bytes(raw[:32], "big"), int.from_bytes(raw[32:64], "big"), raw[64])

    def hex(self) -> str:
        return "0x" + self.to_bytes().hex()

    @classmethod
    def from_hex(cls, text: str) -> Signature:
        return cls.from_bytes(bytes.fromhex(text[2:] if text.startswith("0x") else text))


def _rfc6979_nonces(secret: int, digest: bytes):
    """Deterministic nonce candidates (RFC 6979, HMAC-SHA256, qlen = 256)."""
    x = secret.to_bytes(32, "big")
    h = (int.from_bytes(digest, "big") % CURVE_N).to_bytes(32, "big")
    v = b"\x01" * 32
    k = b"\x00" * 32
    k = hmac.digest(k, v + b"\x00" + x + h, "sha256")
    v = hmac.digest(k, v, "sha256")
    k = hmac.digest(k, v + b"\x01" + x + h, "sha256")
    v = hmac.digest(k, v, "sha256")
    while True:
        v = hmac.digest(k, v, "sha256")
        candidate = int.from_bytes(v, "big")
        if 1 <= candidate < CURVE_N:
            yield candidate
        k = hmac.digest(k, v + b"\x00", "sha256")
        v = hmac.digest(k, v, "sha256")


@lru_cache(maxsize=1 << 16)
def _sign(secret: int, digest: bytes) -> Signature:
    z = int.from_bytes(digest, "big")
    for k in _rfc6979_nonces(secret, digest):
        point = _backend.base_mul(k)
        x, y = point
        r = x % CURVE_N
        # x >= n would need recovery ids 2/3, which the wire format excludes
        if r == 0 or x >= CURVE_N:
            continue
        s = _inv_n(k) * (z + r * secret) % CURVE_N
        if s == 0:
            continue
        v = y & 1
        if s > HALF_N:
            s = CURVE_N - s
            v ^= 1
        return Signature(r, s, v)


def sign(key: KeyPair, digest: bytes) -> Signature:
    """Deterministic low-s signature over a 32-byte digest (no message prefix)."""
    if len(digest) != 32:
        raise CryptoError("digest must be 32 bytes")
    return _sign(key.secret, bytes(digest))


@lru_cache(maxsize=1 << 16)
def _recover_point(digest: bytes, r: int, s: int, v: int) -> tuple[int, int]:
    if not (0 < r < CURVE_N and 0 < s <= HALF_N and v in (0, 1)):
        raise RecoveryError("signature components out of range or not low-s")
    big_r = _backend.lift_x(r, v)
    if big_r is None:
        raise RecoveryError("r is not the x-coordinate of a curve point")
    z = int.from_bytes(digest, "big")
    r_inv = _inv_n(r)
    q = _backend.mul_add(-z * r_inv % CURVE_N, s * r_inv % CURVE_N, big_r)
    if q is None:
        raise RecoveryError("recovered point at infinity")
    return q


def recover_public(digest: bytes, sig: Signature) -> tuple[int, int]:
    if len(digest) != 32:
        raise CryptoError("digest must be 32 bytes")
    return _recover_point(bytes(digest), sig.r, sig.s, sig.v)


def recover(digest: bytes, sig: Signature) -> Address:
    """Signer address; raises RecoveryError rather than guessing."""
    q = recover_public(digest, sig)
    _remember(q)
    return derive_address(q)


# Verification against a known address.  Once an address has been recovered
# its public key is remembered; frequently verified keys get a precomputed
# multiple table so verification skips both the square root and the
# variable-base multiplication.  The check R' = (z/s)G + (r/s)Q with
# x(R') == r and parity(R') == v is equivalent to recover() == address.

_KNOWN_KEYS: dict[bytes, tuple[int, int]] = {}
_KEY_USES: dict[bytes, int] = {}
_TABLE_AFTER = 8
_MAX_KNOWN = 1 << 14


def _remember(public: tuple[int, int]) -> None:
    if len(_KNOWN_KEYS) >= _MAX_KNOWN:
        _KNOWN_KEYS.clear()
        _KEY_USES.clear()
    _KNOWN_KEYS.setdefault(derive_address(public), public)


@lru_cache(maxsize=256)
def _table(public: tuple[int, int]):
    return _backend.PointTable(public)


def verify(digest: bytes, sig: Signature, address: bytes) -> bool:
    """True iff ``recover(digest, sig) == address``; never raises on bad input."""
    if len(digest) != 32 or len(address) != 20:
        return False
    return _verify(bytes(digest), sig.r, sig.s, sig.v, bytes(address))


@lru_cache(maxsize=1 << 16)
def _verify(digest: bytes, r: int, s: int, v: int, address: bytes) -> bool:
    public = _KNOWN_KEYS.get(address)
    uses = _KEY_USES.get(address, 0) + 1
    _KEY_USES[address] = uses
    if public is not None and uses > _TABLE_AFTER and s <= HALF_N:
        z = int.from_bytes(digest, "big")
        s_inv = _inv_n(s)
        point = _table(public).mul_add(z * s_inv % CURVE_N, r * s_inv % CURVE_N)
        return point is not None and point[0] == r and (point[1] & 1) == v
    try:
        return recover(digest, Signature(r, s, v)) == address
    except CryptoError:
        return False


def agreement_digest(sender: bytes, receiver: bytes, value: int, channel_salt: bytes = ZERO_SALT) -> Digest:
    """keccak256(sender[20] || receiver[20] || value[32, big-endian] || salt[32])."""
    return _agreement_digest(sender, receiver, value, channel_salt)


@lru_cache(maxsize=1 << 16)
def _agreement_digest(sender: bytes, receiver: bytes, value: int, salt: bytes) -> Digest:
    if len(sender) != 20 or len(receiver) != 20:
        raise CryptoError("addresses must be 20 bytes")
    if len(salt) != 32:
        raise CryptoError("channel salt must be 32 bytes")
    if not isinstance(value, int) or not 0 <= value < 2**256:
        raise CryptoError("value must be an integer in [0, 2**256)")
    return keccak256(bytes(sender) + bytes(receiver) + value.to_bytes(32, "big") + bytes(salt))


def clear_caches() -> None:
    """Drop memoized signatures, recoveries, remembered keys and tables."""
    _sign.cache_clear()
    _recover_point.cache_clear()
    _table.cache_clear()
    _verify.cache_clear()
    _agreement_digest.cache_clear()
    _KNOWN_KEYS.clear()
    _KEY_USES.clear()
