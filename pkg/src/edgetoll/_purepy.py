"""Pure-Python keccak256 and secp256k1 kernels.

Slow, but needs nothing beyond the interpreter.  Mirrors the surface of the
compiled ``_core`` module exactly.
"""

from __future__ import annotations

NATIVE = False

P = 2**256 - 2**32 - 977
N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141
G = (
    0x79BE667EF9DCBBAC55A06295CE870B07029BFCDB2DCE28D959F2815B16F81798,
    0x483ADA7726A3C4655DA4FBFC0E1108A8FD17B448A68554199C47D08FFB10D4B8,
)

_MASK = (1 << 64) - 1
_RATE = 136

_RC = [
    0x0000000000000001, 0x0000000000008082, 0x800000000000808A,
    0x8000000080008000, 0x000000000000808B, 0x0000000080000001,
    0x8000000080008081, 0x8000000000008009, 0x000000000000008A,
    0x0000000000000088, 0x0000000080008009, 0x000000008000000A,
    0x000000008000808B, 0x800000000000008B, 0x8000000000008089,
    0x8000000000008003, 0x8000000000008002, 0x8000000000000080,
    0x000000000000800A, 0x800000008000000A, 0x8000000080008081,
    0x8000000000008080, 0x0000000080000001, 0x8000000080008008,
]
_ROT = [1, 3, 6, 10, 15, 21, 28, 36, 45, 55, 2, 14, 27, 41, 56, 8,
        25, 43, 62, 18, 39, 61, 20, 44]
_PI = [10, 7, 11, 17, 18, 3, 5, 16, 8, 21, 24, 4, 15, 23, 19, 13,
       12, 2, 20, 14, 22, 9, 6, 1]


def _keccak_f(st: list[int]) -> None:
    for rc in _RC:
        bc = [st[i] ^ st[i + 5] ^ st[i + 10] ^ st[i + 15] ^ st[i + 20] for i in range(5)]
        for i in range(5):
            t = bc[(i + 4) % 5] ^ (((bc[(i + 1) % 5] << 1) | (bc[(i + 1) % 5] >> 63)) & _MASK)
            for j in range(0, 25, 5):
                st[j + i] ^= t
        t = st[1]
        for i in range(24):
            j = _PI[i]
            nxt = st[j]
            r = _ROT[i]
            st[j] = ((t << r) | (t >> (64 - r))) & _MASK
            t = nxt
        for j in range(0, 25, 5):
            row = st[j:j + 5]
            for i in range(5):
                st[j + i] = row[i] ^ ((~row[(i + 1) % 5] & _MASK) & row[(i + 2) % 5])
        st[0] ^= rc


def keccak256(data) -> bytes:
    data = bytes(data)
    st = [0] * 25
    padded = bytearray(data)
    pad_len = _RATE - len(data) % _RATE
    padded += bytes(pad_len)
    padded[len(data)] ^= 0x01
    padded[-1] ^= 0x80
    for off in range(0, len(padded), _RATE):
        block = padded[off:off + _RATE]
        for i in range(_RATE // 8):
            st[i] ^= int.from_bytes(block[8 * i:8 * i + 8], "little")
        _keccak_f(st)
    return b"".join(lane.to_bytes(8, "little") for lane in st[:4])


# Jacobian points as (X, Y, Z); Z == 0 is infinity.
_INF = (0, 1, 0)


def _on_curve(point) -> bool:
    x, y = point
    return 0 <= x < P and 0 <= y < P and (y * y - x * x * x - 7) % P == 0


def _check(point):
    if not _on_curve(point):
        raise ValueError("point is not on secp256k1")
    return (point[0], point[1], 1)


def _double(p1):
    x1, y1, z1 = p1
    if z1 == 0 or y1 == 0:
        return _INF
    a = x1 * x1 % P
    b = y1 * y1 % P
    c = b * b % P
    d = 2 * ((x1 + b) ** 2 - a - c) % P
    e = 3 * a % P
    x3 = (e * e - 2 * d) % P
    y3 = (e * (d - x3) - 8 * c) % P
    z3 = 2 * y1 * z1 % P
    return (x3, y3, z3)


def _add(p1, p2):
    if p1[2] == 0:
        return p2
    if p2[2] == 0:
        return p1
    x1, y1, z1 = p1
    x2, y2, z2 = p2
    z1z1 = z1 * z1 % P
    z2z2 = z2 * z2 % P
    u1 = x1 * z2z2 % P
    u2 = x2 * z1z1 % P
    s1 = y1 * z2 * z2z2 % P
    s2 = y2 * z1 * z1z1 % P
    h = (u2 - u1) % P
    r = (s2 - s1) % P
    if h == 0:
        return _double(p1) if r == 0 else _INF
    h2 = h * h % P
    h3 = h2 * h % P
    v = u1 * h2 % P
    x3 = (r * r - h3 - 2 * v) % P
    y3 = (r * (v - x3) - s1 * h3) % P
    z3 = h * z1 * z2 % P
    return (x3, y3, z3)


def _mul(k: int, p):
    acc = _INF
    for bit in bin(k)[2:]:
        acc = _double(acc)
        if bit == "1":
            acc = _add(acc, p)
    return acc


def _affine(p):
    x, y, z = p
    if z == 0:
        return None
    zi = pow(z, -1, P)
    zi2 = zi * zi % P
    return (x * zi2 % P, y * zi2 * zi % P)


_GJ = (G[0], G[1], 1)


def base_mul(k: int):
    return _affine(_mul(k % N, _GJ))


def point_mul(k: int, point):
    return _affine(_mul(k % N, _check(point)))


def mul_add(a: int, b: int, point):
    q = _check(point)
    return _affine(_add(_mul(a % N, _GJ), _mul(b % N, q)))


def lift_x(x: int, parity: int):
    if not 0 <= x < P:
        return None
    rhs = (pow(x, 3, P) + 7) % P
    y = pow(rhs, (P + 1) // 4, P)
    if y * y % P != rhs:
        return None
    if (y & 1) != (parity & 1):
        y = P - y
    return (x, y)


class PointTable:
    """Holds a fixed point; no precomputation in the fallback."""

    def __init__(self, point):
        _check(point)
        self.point = (int(point[0]), int(point[1]))

    def mul_add(self, a: int, b: int):
        return mul_add(a, b, self.point)
