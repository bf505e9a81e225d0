# cython: language_level=3, boundscheck=False, wraparound=False
"""Compiled keccak256 and secp256k1 kernels.

Same surface as :mod:`edgetoll._purepy`; :mod:`edgetoll._backend` picks one
at import time.
"""

from libc.stdint cimport uint8_t, uint64_t
from libc.string cimport memcpy


cdef extern from "_ckernels.h":
    ctypedef struct et_fe:
        uint64_t v[4]
    ctypedef struct et_ge:
        et_fe x
        et_fe y
        int inf
    ctypedef struct et_gej:
        et_fe x
        et_fe y
        et_fe z
        int inf
    ctypedef struct et_comb:
        int bits
        int windows
        int per
        et_ge *pts

    const et_fe ET_GX
    const et_fe ET_GY

    void et_keccak256(const uint8_t *data, size_t n, uint8_t *out) nogil
    void et_fe_from_be(et_fe *r, const uint8_t *data) nogil
    void et_fe_to_be(uint8_t *out, const et_fe *a) nogil
    void et_fe_mul(et_fe *r, const et_fe *a, const et_fe *b) nogil
    void et_fe_add(et_fe *r, const et_fe *a, const et_fe *b) nogil
    int et_fe_sqrt(et_fe *r, const et_fe *a) nogil
    void et_fe_set_int(et_fe *r, uint64_t a) nogil
    int et_ge_on_curve(const et_ge *a) nogil
    void et_gej_add(et_gej *r, const et_gej *a, const et_gej *b) nogil
    void et_ge_set_gej(et_ge *r, const et_gej *a) nogil
    int et_comb_build(et_comb *c, const et_ge *p, int bits) nogil
    void et_comb_free(et_comb *c) nogil
    void et_comb_mul(et_gej *r, const et_comb *c, const uint8_t *k) nogil
    void et_ecmult_var(et_gej *r, const et_ge *p, const uint8_t *k) nogil


NATIVE = True

cdef et_comb _G_COMB
cdef bint _g_ready = False


cdef int _load_point(et_ge *out, object point) except -1:
    cdef bytes xb, yb
    x, y = point
    if not (0 <= x < _P and 0 <= y < _P):
        raise ValueError("coordinate out of field range")
    xb = int(x).to_bytes(32, "big")
    yb = int(y).to_bytes(32, "big")
    et_fe_from_be(&out.x, <const uint8_t *>xb)
    et_fe_from_be(&out.y, <const uint8_t *>yb)
    out.inf = 0
    if not et_ge_on_curve(out):
        raise ValueError("point is not on secp256k1")
    return 0


cdef object _to_affine_tuple(et_gej *p):
    cdef et_ge a
    cdef uint8_t buf[64]
    if p.inf:
        return None
    et_ge_set_gej(&a, p)
    et_fe_to_be(buf, &a.x)
    et_fe_to_be(buf + 32, &a.y)
    raw = bytes(buf[:64])
    return int.from_bytes(raw[:32], "big"), int.from_bytes(raw[32:], "big")


cdef bytes _scalar_bytes(object k):
    return (k % _N).to_bytes(32, "big")


_P = 2**256 - 2**32 - 977
_N = 0xFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFFEBAAEDCE6AF48A03BBFD25E8CD0364141


cdef void _init_g():
    global _g_ready
    cdef et_ge g
    g.x = ET_GX
    g.y = ET_GY
    g.inf = 0
    if not et_comb_build(&_G_COMB, &g, 8):
        raise MemoryError()
    _g_ready = True


_init_g()


def keccak256(data):
    """Keccak-256 of a bytes-like object."""
    cdef const uint8_t[:] view
    cdef uint8_t out[32]
    if isinstance(data, bytes):
        buf = <bytes>data
        et_keccak256(<const uint8_t *>(<char *>buf), len(buf), out)
    else:
        view = memoryview(data).cast("B")
        if view.shape[0] == 0:
            et_keccak256(NULL, 0, out)
        else:
            et_keccak256(&view[0], view.shape[0], out)
    return bytes(out[:32])


def base_mul(k):
    """Affine ``k*G`` or None for the point at infinity."""
    cdef et_gej r
    cdef bytes kb = _scalar_bytes(k)
    et_comb_mul(&r, &_G_COMB, <const uint8_t *>kb)
    return _to_affine_tuple(&r)


def point_mul(k, point):
    """Affine ``k*P`` for an affine point P on the curve."""
    cdef et_ge p
    cdef et_gej r
    _load_point(&p, point)
    cdef bytes kb = _scalar_bytes(k)
    et_ecmult_var(&r, &p, <const uint8_t *>kb)
    return _to_affine_tuple(&r)


def mul_add(a, b, point):
    """Affine ``a*G + b*P``."""
    cdef et_ge p
    cdef et_gej r1, r2
    _load_point(&p, point)
    cdef bytes ab = _scalar_bytes(a)
    cdef bytes bb = _scalar_bytes(b)
    et_comb_mul(&r1, &_G_COMB, <const uint8_t *>ab)
    et_ecmult_var(&r2, &p, <const uint8_t *>bb)
    et_gej_add(&r1, &r1, &r2)
    return _to_affine_tuple(&r1)


def lift_x(x, parity):
    """The curve point with abscissa x and the given y parity, or None."""
    cdef et_fe fx, rhs, t, y, seven
    cdef uint8_t buf[32]
    if not 0 <= x < _P:
        return None
    xb = int(x).to_bytes(32, "big")
    et_fe_from_be(&fx, <const uint8_t *>xb)
    et_fe_mul(&t, &fx, &fx)
    et_fe_mul(&rhs, &t, &fx)
    et_fe_set_int(&seven, 7)
    et_fe_add(&rhs, &rhs, &seven)
    if not et_fe_sqrt(&y, &rhs):
        return None
    et_fe_to_be(buf, &y)
    yi = int.from_bytes(bytes(buf[:32]), "big")
    if (yi & 1) != (parity & 1):
        yi = _P - yi
    return int(x), yi


cdef class PointTable:
    """Precomputed multiples of a fixed point P for fast ``a*G + b*P``."""

    cdef et_comb comb
    cdef readonly object point

    def __cinit__(self, point):
        cdef et_ge p
        self.comb.pts = NULL
        _load_point(&p, point)
        if not et_comb_build(&self.comb, &p, 4):
            raise MemoryError()
        self.point = (int(point[0]), int(point[1]))

    def __dealloc__(self):
        if self.comb.pts != NULL:
            et_comb_free(&self.comb)

    def mul_add(self, a, b):
        cdef et_gej r1, r2
        cdef bytes ab = _scalar_bytes(a)
        cdef bytes bb = _scalar_bytes(b)
        et_comb_mul(&r1, &_G_COMB, <const uint8_t *>ab)
        et_comb_mul(&r2, &self.comb, <const uint8_t *>bb)
        et_gej_add(&r1, &r1, &r2)
        return _to_affine_tuple(&r1)
