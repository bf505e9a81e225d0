/* Keccak-256 and secp256k1 point arithmetic used by the _core extension.
 *
 * Field elements are four little-endian 64-bit limbs, always fully reduced
 * modulo p = 2^256 - 2^32 - 977.  Points use Jacobian coordinates; affine
 * tables feed mixed additions.  Nothing here is constant-time.
 */
#ifndef EDGETOLL_CKERNELS_H
#define EDGETOLL_CKERNELS_H

#include <stdint.h>
#include <stdlib.h>
#include <string.h>

typedef unsigned __int128 et_u128;

/* ------------------------------------------------------------------ */
/* Keccak-256 (original padding 0x01, not SHA3's 0x06)                */
/* ------------------------------------------------------------------ */

static const uint64_t et_keccak_rc[24] = {
    0x0000000000000001ULL, 0x0000000000008082ULL, 0x800000000000808aULL,
    0x8000000080008000ULL, 0x000000000000808bULL, 0x0000000080000001ULL,
    0x8000000080008081ULL, 0x8000000000008009ULL, 0x000000000000008aULL,
    0x0000000000000088ULL, 0x0000000080008009ULL, 0x000000008000000aULL,
    0x000000008000808bULL, 0x800000000000008bULL, 0x8000000000008089ULL,
    0x8000000000008003ULL, 0x8000000000008002ULL, 0x8000000000000080ULL,
    0x000000000000800aULL, 0x800000008000000aULL, 0x8000000080008081ULL,
    0x8000000000008080ULL, 0x0000000080000001ULL, 0x8000000080008008ULL};

static const int et_keccak_rot[24] = {1,  3,  6,  10, 15, 21, 28, 36,
                                      45, 55, 2,  14, 27, 41, 56, 8,
                                      25, 43, 62, 18, 39, 61, 20, 44};

static const int et_keccak_pi[24] = {10, 7,  11, 17, 18, 3,  5,  16,
                                     8,  21, 24, 4,  15, 23, 19, 13,
                                     12, 2,  20, 14, 22, 9,  6,  1};

#define ET_ROTL64(x, n) (((x) << (n)) | ((x) >> (64 - (n))))

static void et_keccakf(uint64_t st[25]) {
    uint64_t bc[5], t;
    int i, j, r;
    for (r = 0; r < 24; r++) {
        for (i = 0; i < 5; i++)
            bc[i] = st[i] ^ st[i + 5] ^ st[i + 10] ^ st[i + 15] ^ st[i + 20];
        for (i = 0; i < 5; i++) {
            t = bc[(i + 4) % 5] ^ ET_ROTL64(bc[(i + 1) % 5], 1);
            for (j = 0; j < 25; j += 5) st[j + i] ^= t;
        }
        t = st[1];
        for (i = 0; i < 24; i++) {
            j = et_keccak_pi[i];
            bc[0] = st[j];
            st[j] = ET_ROTL64(t, et_keccak_rot[i]);
            t = bc[0];
        }
        for (j = 0; j < 25; j += 5) {
            for (i = 0; i < 5; i++) bc[i] = st[j + i];
            for (i = 0; i < 5; i++)
                st[j + i] ^= (~bc[(i + 1) % 5]) & bc[(i + 2) % 5];
        }
        st[0] ^= et_keccak_rc[r];
    }
}

static uint64_t et_load64_le(const uint8_t *p) {
    uint64_t v = 0;
    int i;
    for (i = 7; i >= 0; i--) v = (v << 8) | p[i];
    return v;
}

static void et_keccak256(const uint8_t *in, size_t len, uint8_t out[32]) {
    const size_t rate = 136;
    uint64_t st[25];
    uint8_t block[136];
    size_t i;
    memset(st, 0, sizeof(st));
    while (len >= rate) {
        for (i = 0; i < rate / 8; i++) st[i] ^= et_load64_le(in + 8 * i);
        et_keccakf(st);
        in += rate;
        len -= rate;
    }
    memset(block, 0, rate);
    memcpy(block, in, len);
    block[len] ^= 0x01;
    block[rate - 1] ^= 0x80;
    for (i = 0; i < rate / 8; i++) st[i] ^= et_load64_le(block + 8 * i);
    et_keccakf(st);
    for (i = 0; i < 32; i++) out[i] = (uint8_t)(st[i / 8] >> (8 * (i % 8)));
}

/* ------------------------------------------------------------------ */
/* Field arithmetic mod p                                              */
/* ------------------------------------------------------------------ */

typedef struct { uint64_t v[4]; } et_fe;

#define ET_FE_C 0x1000003D1ULL /* 2^256 - p */

static const et_fe ET_FE_P = {{0xFFFFFFFEFFFFFC2FULL, 0xFFFFFFFFFFFFFFFFULL,
                               0xFFFFFFFFFFFFFFFFULL, 0xFFFFFFFFFFFFFFFFULL}};

static inline int et_fe_geq_p(const uint64_t r[4]) {
    return r[3] == 0xFFFFFFFFFFFFFFFFULL && r[2] == 0xFFFFFFFFFFFFFFFFULL &&
           r[1] == 0xFFFFFFFFFFFFFFFFULL && r[0] >= 0xFFFFFFFEFFFFFC2FULL;
}

/* r += ET_FE_C modulo 2^256 */
static inline void et_fe_add_c(uint64_t r[4]) {
    et_u128 c = (et_u128)r[0] + ET_FE_C;
    r[0] = (uint64_t)c;
    c >>= 64;
    for (int i = 1; i < 4 && c; i++) {
        c += r[i];
        r[i] = (uint64_t)c;
        c >>= 64;
    }
}

static inline void et_fe_set_zero(et_fe *r) { memset(r, 0, sizeof(*r)); }

static inline void et_fe_set_int(et_fe *r, uint64_t a) {
    et_fe_set_zero(r);
    r->v[0] = a;
}

static inline int et_fe_is_zero(const et_fe *a) {
    return (a->v[0] | a->v[1] | a->v[2] | a->v[3]) == 0;
}

static inline int et_fe_eq(const et_fe *a, const et_fe *b) {
    return a->v[0] == b->v[0] && a->v[1] == b->v[1] && a->v[2] == b->v[2] &&
           a->v[3] == b->v[3];
}

static inline void et_fe_add(et_fe *r, const et_fe *a, const et_fe *b) {
    et_u128 c = 0;
    uint64_t o[4];
    for (int i = 0; i < 4; i++) {
        c += (et_u128)a->v[i] + b->v[i];
        o[i] = (uint64_t)c;
        c >>= 64;
    }
    if (c || et_fe_geq_p(o)) et_fe_add_c(o);
    memcpy(r->v, o, sizeof(o));
}

static inline void et_fe_sub(et_fe *r, const et_fe *a, const et_fe *b) {
    uint64_t o[4], borrow = 0;
    for (int i = 0; i < 4; i++) {
        et_u128 d = (et_u128)a->v[i] - b->v[i] - borrow;
        o[i] = (uint64_t)d;
        borrow = (uint64_t)(d >> 64) & 1;
    }
    if (borrow) {
        /* o holds a - b + 2^256; subtract C to land on a - b + p */
        et_u128 d = (et_u128)o[0] - ET_FE_C;
        o[0] = (uint64_t)d;
        borrow = (uint64_t)(d >> 64) & 1;
        for (int i = 1; i < 4; i++) {
            d = (et_u128)o[i] - borrow;
            o[i] = (uint64_t)d;
            borrow = (uint64_t)(d >> 64) & 1;
        }
    }
    memcpy(r->v, o, sizeof(o));
}

/* reduce a 512-bit product t modulo p, using 2^256 = C (mod p) */
static inline void et_fe_reduce(et_fe *r, const uint64_t t[8]) {
    uint64_t o[4];
    et_u128 c = 0;
    int i;
    for (i = 0; i < 4; i++) {
        c += (et_u128)t[i + 4] * ET_FE_C + t[i];
        o[i] = (uint64_t)c;
        c >>= 64;
    }
    c = (et_u128)(uint64_t)c * ET_FE_C + o[0];
    o[0] = (uint64_t)c;
    c >>= 64;
    for (i = 1; i < 4; i++) {
        c += o[i];
        o[i] = (uint64_t)c;
        c >>= 64;
    }
    if (c) et_fe_add_c(o);
    if (et_fe_geq_p(o)) et_fe_add_c(o);
    memcpy(r->v, o, sizeof(o));
}

/* column accumulator (c0, c1, c2) += a * b */
#define ET_MULADD(a, b)                                     \
    do {                                                    \
        et_u128 m_ = (et_u128)(a) * (b);                    \
        uint64_t lo_ = (uint64_t)m_, hi_ = (uint64_t)(m_ >> 64); \
        c0 += lo_;                                          \
        hi_ += c0 < lo_;                                    \
        c1 += hi_;                                          \
        c2 += c1 < hi_;                                     \
    } while (0)

/* (c0, c1, c2) += 2 * a * b */
#define ET_MULADD2(a, b)                                    \
    do {                                                    \
        et_u128 m_ = (et_u128)(a) * (b);                    \
        uint64_t lo_ = (uint64_t)m_, hi_ = (uint64_t)(m_ >> 64); \
        c2 += hi_ >> 63;                                    \
        hi_ = (hi_ << 1) | (lo_ >> 63);                     \
        lo_ <<= 1;                                          \
        c0 += lo_;                                          \
        hi_ += c0 < lo_;                                    \
        c1 += hi_;                                          \
        c2 += c1 < hi_;                                     \
    } while (0)

#define ET_EXTRACT(out)  \
    do {                 \
        (out) = c0;      \
        c0 = c1;         \
        c1 = c2;         \
        c2 = 0;          \
    } while (0)

static inline void et_fe_mul(et_fe *r, const et_fe *a, const et_fe *b) {
    const uint64_t *x = a->v, *y = b->v;
    uint64_t t[8], c0 = 0, c1 = 0, c2 = 0;
    ET_MULADD(x[0], y[0]);
    ET_EXTRACT(t[0]);
    ET_MULADD(x[0], y[1]); ET_MULADD(x[1], y[0]);
    ET_EXTRACT(t[1]);
    ET_MULADD(x[0], y[2]); ET_MULADD(x[1], y[1]); ET_MULADD(x[2], y[0]);
    ET_EXTRACT(t[2]);
    ET_MULADD(x[0], y[3]); ET_MULADD(x[1], y[2]); ET_MULADD(x[2], y[1]); ET_MULADD(x[3], y[0]);
    ET_EXTRACT(t[3]);
    ET_MULADD(x[1], y[3]); ET_MULADD(x[2], y[2]); ET_MULADD(x[3], y[1]);
    ET_EXTRACT(t[4]);
    ET_MULADD(x[2], y[3]); ET_MULADD(x[3], y[2]);
    ET_EXTRACT(t[5]);
    ET_MULADD(x[3], y[3]);
    ET_EXTRACT(t[6]);
    t[7] = c0;
    et_fe_reduce(r, t);
}

static inline void et_fe_sqr(et_fe *r, const et_fe *a) {
    const uint64_t *x = a->v;
    uint64_t t[8], c0 = 0, c1 = 0, c2 = 0;
    ET_MULADD(x[0], x[0]);
    ET_EXTRACT(t[0]);
    ET_MULADD2(x[0], x[1]);
    ET_EXTRACT(t[1]);
    ET_MULADD2(x[0], x[2]); ET_MULADD(x[1], x[1]);
    ET_EXTRACT(t[2]);
    ET_MULADD2(x[0], x[3]); ET_MULADD2(x[1], x[2]);
    ET_EXTRACT(t[3]);
    ET_MULADD2(x[1], x[3]); ET_MULADD(x[2], x[2]);
    ET_EXTRACT(t[4]);
    ET_MULADD2(x[2], x[3]);
    ET_EXTRACT(t[5]);
    ET_MULADD(x[3], x[3]);
    ET_EXTRACT(t[6]);
    t[7] = c0;
    et_fe_reduce(r, t);
}

static inline void et_fe_sqr_n(et_fe *r, const et_fe *a, int n) {
    *r = *a;
    while (n-- > 0) et_fe_sqr(r, r);
}

/* a^(2^223 - 1) and the shorter runs the exponent chains reuse */
static void et_fe_chain223(et_fe *x223, et_fe *x22, et_fe *x2, const et_fe *a) {
    et_fe x3, x6, x9, x11, x44, x88, x176, x220, t;
    et_fe_sqr(&t, a);
    et_fe_mul(x2, &t, a);
    et_fe_sqr(&t, x2);
    et_fe_mul(&x3, &t, a);
    et_fe_sqr_n(&t, &x3, 3);
    et_fe_mul(&x6, &t, &x3);
    et_fe_sqr_n(&t, &x6, 3);
    et_fe_mul(&x9, &t, &x3);
    et_fe_sqr_n(&t, &x9, 2);
    et_fe_mul(&x11, &t, x2);
    et_fe_sqr_n(&t, &x11, 11);
    et_fe_mul(x22, &t, &x11);
    et_fe_sqr_n(&t, x22, 22);
    et_fe_mul(&x44, &t, x22);
    et_fe_sqr_n(&t, &x44, 44);
    et_fe_mul(&x88, &t, &x44);
    et_fe_sqr_n(&t, &x88, 88);
    et_fe_mul(&x176, &t, &x88);
    et_fe_sqr_n(&t, &x176, 44);
    et_fe_mul(&x220, &t, &x44);
    et_fe_sqr_n(&t, &x220, 3);
    et_fe_mul(x223, &t, &x3);
}

/* r = a^(p - 2) */
static void et_fe_inv(et_fe *r, const et_fe *a) {
    et_fe x223, x22, x2, t;
    et_fe_chain223(&x223, &x22, &x2, a);
    et_fe_sqr_n(&t, &x223, 23);
    et_fe_mul(&t, &t, &x22);
    et_fe_sqr_n(&t, &t, 5);
    et_fe_mul(&t, &t, a);
    et_fe_sqr_n(&t, &t, 3);
    et_fe_mul(&t, &t, &x2);
    et_fe_sqr_n(&t, &t, 2);
    et_fe_mul(r, &t, a);
}

/* returns 1 and sets r when a is a quadratic residue; r = a^((p + 1) / 4) */
static int et_fe_sqrt(et_fe *r, const et_fe *a) {
    et_fe x223, x22, x2, s, chk;
    et_fe_chain223(&x223, &x22, &x2, a);
    et_fe_sqr_n(&s, &x223, 23);
    et_fe_mul(&s, &s, &x22);
    et_fe_sqr_n(&s, &s, 6);
    et_fe_mul(&s, &s, &x2);
    et_fe_sqr_n(&s, &s, 2);
    et_fe_sqr(&chk, &s);
    if (!et_fe_eq(&chk, a)) return 0;
    *r = s;
    return 1;
}

static void et_fe_from_be(et_fe *r, const uint8_t in[32]) {
    for (int i = 0; i < 4; i++) {
        uint64_t v = 0;
        for (int k = 0; k < 8; k++) v = (v << 8) | in[8 * (3 - i) + k];
        r->v[i] = v;
    }
}

static void et_fe_to_be(uint8_t out[32], const et_fe *a) {
    for (int i = 0; i < 4; i++) {
        uint64_t v = a->v[i];
        for (int k = 7; k >= 0; k--) {
            out[8 * (3 - i) + k] = (uint8_t)v;
            v >>= 8;
        }
    }
}

/* ------------------------------------------------------------------ */
/* Points                                                              */
/* ------------------------------------------------------------------ */

typedef struct { et_fe x, y; int inf; } et_ge;
typedef struct { et_fe x, y, z; int inf; } et_gej;

static const et_fe ET_GX = {{0x59F2815B16F81798ULL, 0x029BFCDB2DCE28D9ULL,
                             0x55A06295CE870B07ULL, 0x79BE667EF9DCBBACULL}};
static const et_fe ET_GY = {{0x9C47D08FFB10D4B8ULL, 0xFD17B448A6855419ULL,
                             0x5DA4FBFC0E1108A8ULL, 0x483ADA7726A3C465ULL}};

static inline void et_gej_set_inf(et_gej *r) {
    memset(r, 0, sizeof(*r));
    r->inf = 1;
}

static inline void et_gej_set_ge(et_gej *r, const et_ge *a) {
    if (a->inf) {
        et_gej_set_inf(r);
        return;
    }
    r->x = a->x;
    r->y = a->y;
    et_fe_set_int(&r->z, 1);
    r->inf = 0;
}

static int et_ge_on_curve(const et_ge *a) {
    et_fe y2, x3, seven;
    et_fe_sqr(&y2, &a->y);
    et_fe_sqr(&x3, &a->x);
    et_fe_mul(&x3, &x3, &a->x);
    et_fe_set_int(&seven, 7);
    et_fe_add(&x3, &x3, &seven);
    return et_fe_eq(&y2, &x3);
}

/* dbl-2009-l, a = 0 */
static void et_gej_double(et_gej *r, const et_gej *a) {
    if (a->inf || et_fe_is_zero(&a->y)) {
        et_gej_set_inf(r);
        return;
    }
    et_fe A, B, C, D, E, F, t, z3;
    et_fe_mul(&z3, &a->y, &a->z);
    et_fe_add(&z3, &z3, &z3);
    et_fe_sqr(&A, &a->x);
    et_fe_sqr(&B, &a->y);
    et_fe_sqr(&C, &B);
    et_fe_add(&t, &a->x, &B);
    et_fe_sqr(&t, &t);
    et_fe_sub(&t, &t, &A);
    et_fe_sub(&t, &t, &C);
    et_fe_add(&D, &t, &t);
    et_fe_add(&E, &A, &A);
    et_fe_add(&E, &E, &A);
    et_fe_sqr(&F, &E);
    et_fe_sub(&r->x, &F, &D);
    et_fe_sub(&r->x, &r->x, &D);
    et_fe_sub(&t, &D, &r->x);
    et_fe_mul(&t, &E, &t);
    et_fe_add(&C, &C, &C);
    et_fe_add(&C, &C, &C);
    et_fe_add(&C, &C, &C);
    et_fe_sub(&r->y, &t, &C);
    r->z = z3;
    r->inf = 0;
}

/* madd-2007-bl: r = a + b with b affine */
static void et_gej_add_ge(et_gej *r, const et_gej *a, const et_ge *b) {
    if (b->inf) {
        *r = *a;
        return;
    }
    if (a->inf) {
        et_gej_set_ge(r, b);
        return;
    }
    et_fe z1z1, u2, s2, h, hh, i, j, rr, v, t;
    et_fe_sqr(&z1z1, &a->z);
    et_fe_mul(&u2, &b->x, &z1z1);
    et_fe_mul(&s2, &b->y, &a->z);
    et_fe_mul(&s2, &s2, &z1z1);
    et_fe_sub(&h, &u2, &a->x);
    et_fe_sub(&rr, &s2, &a->y);
    if (et_fe_is_zero(&h)) {
        if (et_fe_is_zero(&rr)) {
            et_gej_double(r, a);
        } else {
            et_gej_set_inf(r);
        }
        return;
    }
    et_fe_add(&rr, &rr, &rr);
    et_fe_sqr(&hh, &h);
    et_fe_add(&i, &hh, &hh);
    et_fe_add(&i, &i, &i);
    et_fe_mul(&j, &h, &i);
    et_fe_mul(&v, &a->x, &i);
    et_fe x3, y3, z3;
    et_fe_sqr(&x3, &rr);
    et_fe_sub(&x3, &x3, &j);
    et_fe_sub(&x3, &x3, &v);
    et_fe_sub(&x3, &x3, &v);
    et_fe_sub(&t, &v, &x3);
    et_fe_mul(&y3, &rr, &t);
    et_fe_mul(&t, &a->y, &j);
    et_fe_add(&t, &t, &t);
    et_fe_sub(&y3, &y3, &t);
    et_fe_add(&z3, &a->z, &h);
    et_fe_sqr(&z3, &z3);
    et_fe_sub(&z3, &z3, &z1z1);
    et_fe_sub(&z3, &z3, &hh);
    r->x = x3;
    r->y = y3;
    r->z = z3;
    r->inf = 0;
}

/* add-2007-bl: general Jacobian addition */
static void et_gej_add(et_gej *r, const et_gej *a, const et_gej *b) {
    if (a->inf) {
        *r = *b;
        return;
    }
    if (b->inf) {
        *r = *a;
        return;
    }
    et_fe z1z1, z2z2, u1, u2, s1, s2, h, i, j, rr, v, t;
    et_fe_sqr(&z1z1, &a->z);
    et_fe_sqr(&z2z2, &b->z);
    et_fe_mul(&u1, &a->x, &z2z2);
    et_fe_mul(&u2, &b->x, &z1z1);
    et_fe_mul(&s1, &a->y, &b->z);
    et_fe_mul(&s1, &s1, &z2z2);
    et_fe_mul(&s2, &b->y, &a->z);
    et_fe_mul(&s2, &s2, &z1z1);
    et_fe_sub(&h, &u2, &u1);
    et_fe_sub(&rr, &s2, &s1);
    if (et_fe_is_zero(&h)) {
        if (et_fe_is_zero(&rr)) {
            et_gej_double(r, a);
        } else {
            et_gej_set_inf(r);
        }
        return;
    }
    et_fe_add(&rr, &rr, &rr);
    et_fe_add(&i, &h, &h);
    et_fe_sqr(&i, &i);
    et_fe_mul(&j, &h, &i);
    et_fe_mul(&v, &u1, &i);
    et_fe x3, y3, z3;
    et_fe_sqr(&x3, &rr);
    et_fe_sub(&x3, &x3, &j);
    et_fe_sub(&x3, &x3, &v);
    et_fe_sub(&x3, &x3, &v);
    et_fe_sub(&t, &v, &x3);
    et_fe_mul(&y3, &rr, &t);
    et_fe_mul(&t, &s1, &j);
    et_fe_add(&t, &t, &t);
    et_fe_sub(&y3, &y3, &t);
    et_fe_add(&z3, &a->z, &b->z);
    et_fe_sqr(&z3, &z3);
    et_fe_sub(&z3, &z3, &z1z1);
    et_fe_sub(&z3, &z3, &z2z2);
    et_fe_mul(&z3, &z3, &h);
    r->x = x3;
    r->y = y3;
    r->z = z3;
    r->inf = 0;
}

static void et_ge_set_gej(et_ge *r, const et_gej *a) {
    if (a->inf) {
        memset(r, 0, sizeof(*r));
        r->inf = 1;
        return;
    }
    et_fe zi, zi2, zi3;
    et_fe_inv(&zi, &a->z);
    et_fe_sqr(&zi2, &zi);
    et_fe_mul(&zi3, &zi2, &zi);
    et_fe_mul(&r->x, &a->x, &zi2);
    et_fe_mul(&r->y, &a->y, &zi3);
    r->inf = 0;
}

/* Batch conversion with one inversion (Montgomery's trick).  Points at
 * infinity are passed through. */
static void et_ge_set_gej_batch(et_ge *r, const et_gej *a, size_t n) {
    et_fe *prefix = (et_fe *)malloc(sizeof(et_fe) * (n ? n : 1));
    et_fe acc, inv, zi, zi2, zi3;
    size_t i;
    et_fe_set_int(&acc, 1);
    for (i = 0; i < n; i++) {
        prefix[i] = acc;
        if (!a[i].inf) et_fe_mul(&acc, &acc, &a[i].z);
    }
    et_fe_inv(&inv, &acc);
    for (i = n; i-- > 0;) {
        if (a[i].inf) {
            memset(&r[i], 0, sizeof(r[i]));
            r[i].inf = 1;
            continue;
        }
        et_fe_mul(&zi, &inv, &prefix[i]);
        et_fe_mul(&inv, &inv, &a[i].z);
        et_fe_sqr(&zi2, &zi);
        et_fe_mul(&zi3, &zi2, &zi);
        et_fe_mul(&r[i].x, &a[i].x, &zi2);
        et_fe_mul(&r[i].y, &a[i].y, &zi3);
        r[i].inf = 0;
    }
    free(prefix);
}

/* ------------------------------------------------------------------ */
/* Fixed-window comb tables: table[w][d-1] = d * 2^(bits*w) * P        */
/* ------------------------------------------------------------------ */

typedef struct {
    int bits;    /* window width */
    int windows; /* 256 / bits */
    int per;     /* (1 << bits) - 1 entries per window */
    et_ge *pts;
} et_comb;

static int et_comb_build(et_comb *c, const et_ge *p, int bits) {
    c->bits = bits;
    c->windows = 256 / bits;
    c->per = (1 << bits) - 1;
    size_t n = (size_t)c->windows * (size_t)c->per;
    et_gej *jac = (et_gej *)malloc(sizeof(et_gej) * n);
    c->pts = (et_ge *)malloc(sizeof(et_ge) * n);
    if (!jac || !c->pts) {
        free(jac);
        free(c->pts);
        c->pts = NULL;
        return 0;
    }
    et_gej base;
    et_gej_set_ge(&base, p);
    for (int w = 0; w < c->windows; w++) {
        et_gej *row = jac + (size_t)w * c->per;
        row[0] = base;
        for (int d = 1; d < c->per; d++) et_gej_add(&row[d], &row[d - 1], &base);
        /* next base = 2^bits * base = (per * base) + base */
        et_gej_add(&base, &row[c->per - 1], &base);
    }
    et_ge_set_gej_batch(c->pts, jac, n);
    free(jac);
    return 1;
}

static void et_comb_free(et_comb *c) {
    free(c->pts);
    c->pts = NULL;
}

/* k as 32 big-endian bytes */
static void et_comb_mul(et_gej *r, const et_comb *c, const uint8_t k[32]) {
    et_gej acc;
    et_gej_set_inf(&acc);
    for (int w = 0; w < c->windows; w++) {
        int bit = w * c->bits;
        unsigned d = 0;
        for (int b = 0; b < c->bits; b++) {
            int pos = bit + b;
            unsigned byte = k[31 - pos / 8];
            d |= ((byte >> (pos % 8)) & 1u) << b;
        }
        if (d) et_gej_add_ge(&acc, &acc, &c->pts[(size_t)w * c->per + d - 1]);
    }
    *r = acc;
}

/* Variable-base multiplication, 4-bit window over a Jacobian table. */
static void et_ecmult_var(et_gej *r, const et_ge *p, const uint8_t k[32]) {
    et_gej tab[16], acc;
    int i, j;
    et_gej_set_inf(&tab[0]);
    et_gej_set_ge(&tab[1], p);
    for (i = 2; i < 16; i++) et_gej_add_ge(&tab[i], &tab[i - 1], p);
    et_gej_set_inf(&acc);
    for (i = 0; i < 32; i++) {
        for (j = 0; j < 2; j++) {
            unsigned nib = j == 0 ? (k[i] >> 4) : (k[i] & 0xF);
            if (!acc.inf) {
                et_gej_double(&acc, &acc);
                et_gej_double(&acc, &acc);
                et_gej_double(&acc, &acc);
                et_gej_double(&acc, &acc);
            }
            if (nib) et_gej_add(&acc, &acc, &tab[nib]);
        }
    }
    *r = acc;
}

#endif /* EDGETOLL_CKERNELS_H */
