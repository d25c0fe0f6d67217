"""BLS12-381 pairing arithmetic.

Self-contained implementation of the curve pair E(Fp): y^2 = x^3 + 4 and its
sextic M-twist E'(Fp2): y^2 = x^3 + 4(u+1), with an optimal-ate pairing into
Fp12.  Field elements are plain tuples and module-level functions, which keeps
the inner loops free of attribute lookups; Fp12 is represented directly as a
degree-6 extension of Fp2 (basis 1, w, ..., w^5 with w^6 = u+1), which makes
the sparse line multiplications and the serialized byte layout straightforward.

Nothing in this module is secret-dependent in a constant-time sense; it is a
correctness-first implementation for an application-layer scheme, not a
hardened primitive.
"""

from __future__ import annotations

import hashlib

try:  # modular inverse via extended gcd is ~30x faster than pow(x, p-2, p)
    from gmpy2 import invert as _gmpy_invert

    def _inv_mod(a, m):
        return int(_gmpy_invert(a, m))
except ImportError:  # pragma: no cover

    def _inv_mod(a, m):
        return pow(a, m - 2, m)

# Base field, scalar field, and the BLS parameter (|x|; x itself is negative).
P = 0x1A0111EA397FE69A4B1BA7B6434BACD764774B84F38512BF6730D2A0F6B0F6241EABFFFEB153FFFFB9FEFFFFFFFFAAAB
R = 0x73EDA753299D7D483339D80809A1D80553BDA402FFFE5BFEFFFFFFFF00000001
BLS_X = 0xD201000000010000

# Cofactor of the G1 subgroup (used for hash-to-curve cofactor clearing).
G1_COFACTOR = 0x396C8C005555E1568C00AAAB0000AAAB

FP_BYTES = 48

# ---------------------------------------------------------------------------
# Fp2 = Fp[u] / (u^2 + 1), elements are (a, b) meaning a + b*u.

FP2_ZERO = (0, 0)
FP2_ONE = (1, 0)


def fp2_add(x, y):
    return ((x[0] + y[0]) % P, (x[1] + y[1]) % P)


def fp2_sub(x, y):
    return ((x[0] - y[0]) % P, (x[1] - y[1]) % P)


def fp2_neg(x):
    return (-x[0] % P, -x[1] % P)


def fp2_conj(x):
    return (x[0], -x[1] % P)


def fp2_mul(x, y):
    a, b = x
    c, d = y
    ac = a * c
    bd = b * d
    return ((ac - bd) % P, ((a + b) * (c + d) - ac - bd) % P)


def fp2_sqr(x):
    a, b = x
    return ((a + b) * (a - b) % P, 2 * a * b % P)


def fp2_mul_scalar(x, k):
    return (x[0] * k % P, x[1] * k % P)


def fp2_inv(x):
    a, b = x
    t = _inv_mod(a * a + b * b, P)
    return (a * t % P, -b * t % P)


def fp2_pow(x, e):
    out = FP2_ONE
    base = x
    while e:
        if e & 1:
            out = fp2_mul(out, base)
        base = fp2_sqr(base)
        e >>= 1
    return out


# Non-residue used by both the twist and the Fp12 tower.
XI = (1, 1)  # u + 1


# ---------------------------------------------------------------------------
# Fp12 = Fp2[w] / (w^6 - (u+1)), elements are 6-tuples of Fp2 coefficients
# (c0, ..., c5) meaning sum(ci * w^i).  This coincides coefficient-wise with
# the conventional 2-3-2 tower: ci here is tower coefficient c[i%2].c[i//2].

FP12_ONE = (FP2_ONE, FP2_ZERO, FP2_ZERO, FP2_ZERO, FP2_ZERO, FP2_ZERO)


def fp12_mul(x, y):
    # Schoolbook degree-6 polynomial product with reduction by w^6 = xi.
    prod = [FP2_ZERO] * 11
    for i in range(6):
        xi_c = x[i]
        if xi_c == FP2_ZERO:
            continue
        for j in range(6):
            if y[j] == FP2_ZERO:
                continue
            prod[i + j] = fp2_add(prod[i + j], fp2_mul(xi_c, y[j]))
    out = prod[:6]
    for k in range(10, 5, -1):
        c = prod[k]
        if c != FP2_ZERO:
            out[k - 6] = fp2_add(out[k - 6], fp2_mul(c, XI))
    return tuple(out)


def fp12_sqr(x):
    prod = [FP2_ZERO] * 11
    for i in range(6):
        if x[i] == FP2_ZERO:
            continue
        prod[2 * i] = fp2_add(prod[2 * i], fp2_sqr(x[i]))
        for j in range(i + 1, 6):
            if x[j] == FP2_ZERO:
                continue
            t = fp2_mul(x[i], x[j])
            prod[i + j] = fp2_add(prod[i + j], fp2_add(t, t))
    out = prod[:6]
    for k in range(10, 5, -1):
        c = prod[k]
        if c != FP2_ZERO:
            out[k - 6] = fp2_add(out[k - 6], fp2_mul(c, XI))
    return tuple(out)


def fp12_conj(x):
    # The p^6 Frobenius: w -> -w, Fp2 coefficients are fixed.
    return (x[0], fp2_neg(x[1]), x[2], fp2_neg(x[3]), x[4], fp2_neg(x[5]))


def fp12_inv(x):
    # Inverse via the norm to Fp6-free route: solve with conjugate tower.
    # Write x = a(w^2) + b(w^2)*w with a, b polynomials in v = w^2 (an Fp6
    # value); then x * (a - b*w) = a^2 - b^2*v is in Fp6.
    a = (x[0], x[2], x[4])
    b = (x[1], x[3], x[5])
    a2 = _fp6_sqr(a)
    b2v = _fp6_mul_by_v(_fp6_sqr(b))
    t = _fp6_inv(_fp6_sub(a2, b2v))
    ar = _fp6_mul(a, t)
    br = _fp6_neg(_fp6_mul(b, t))
    return (ar[0], br[0], ar[1], br[1], ar[2], br[2])


# Minimal Fp6 = Fp2[v]/(v^3 - xi) helpers backing fp12_inv.
def _fp6_mul(x, y):
    a0, a1, a2 = x
    b0, b1, b2 = y
    t0 = fp2_mul(a0, b0)
    t1 = fp2_mul(a1, b1)
    t2 = fp2_mul(a2, b2)
    c0 = fp2_add(t0, fp2_mul(fp2_sub(fp2_mul(fp2_add(a1, a2), fp2_add(b1, b2)), fp2_add(t1, t2)), XI))
    c1 = fp2_add(fp2_sub(fp2_mul(fp2_add(a0, a1), fp2_add(b0, b1)), fp2_add(t0, t1)), fp2_mul(t2, XI))
    c2 = fp2_add(fp2_sub(fp2_mul(fp2_add(a0, a2), fp2_add(b0, b2)), fp2_add(t0, t2)), t1)
    return (c0, c1, c2)


def _fp6_sqr(x):
    return _fp6_mul(x, x)


def _fp6_sub(x, y):
    return (fp2_sub(x[0], y[0]), fp2_sub(x[1], y[1]), fp2_sub(x[2], y[2]))


def _fp6_neg(x):
    return (fp2_neg(x[0]), fp2_neg(x[1]), fp2_neg(x[2]))


def _fp6_mul_by_v(x):
    return (fp2_mul(x[2], XI), x[0], x[1])


def _fp6_inv(x):
    a0, a1, a2 = x
    c0 = fp2_sub(fp2_sqr(a0), fp2_mul(fp2_mul(a1, a2), XI))
    c1 = fp2_sub(fp2_mul(fp2_sqr(a2), XI), fp2_mul(a0, a1))
    c2 = fp2_sub(fp2_sqr(a1), fp2_mul(a0, a2))
    t = fp2_add(fp2_mul(fp2_add(fp2_mul(a2, c1), fp2_mul(a1, c2)), XI), fp2_mul(a0, c0))
    ti = fp2_inv(t)
    return (fp2_mul(c0, ti), fp2_mul(c1, ti), fp2_mul(c2, ti))


def fp12_pow(x, e):
    out = FP12_ONE
    base = x
    while e:
        if e & 1:
            out = fp12_mul(out, base)
        base = fp12_sqr(base)
        e >>= 1
    return out


# Frobenius: (sum ci w^i)^(p^e) = sum ci^(p^e) * gamma[e][i] * w^i where
# gamma[e][i] = xi^(i*(p^e-1)/6).  Precomputed once at import.
def _frob_gammas():
    gammas = {}
    for e in (1, 2, 3):
        pe = P**e
        base = fp2_pow(XI, (pe - 1) // 6)
        row = [FP2_ONE]
        for _ in range(5):
            row.append(fp2_mul(row[-1], base))
        gammas[e] = row
    return gammas


_GAMMAS = _frob_gammas()


def fp12_frobenius(x, e):
    row = _GAMMAS[e]
    odd = e % 2 == 1
    out = []
    for i in range(6):
        c = fp2_conj(x[i]) if odd else x[i]
        out.append(fp2_mul(c, row[i]))
    return tuple(out)


# ---------------------------------------------------------------------------
# Curve points.  Affine tuples (x, y); None is the point at infinity.

G1_GEN = (
    0x17F1D3A73197D7942695638C4FA9AC0FC3688C4F9774B905A14E3A3F171BAC586C55E83FF97A1AEFFB3AF00ADB22C6BB,
    0x08B3F481E3AAA0F1A09E30ED741D8AE4FCF5E095D5D00AF600DB18CB2C04B3EDD03CC744A2888AE40CAA232946C5E7E1,
)
G2_GEN = (
    (
        0x024AA2B2F08F0A91260805272DC51051C6E47AD4FA403B02B4510B647AE3D1770BAC0326A805BBEFD48056C8C121BDB8,
        0x13E02B6052719F607DACD3A088274F65596BD0D09920B61AB5DA61BBDC7F5049334CF11213945D57E5AC7D055D042B7E,
    ),
    (
        0x0CE5D527727D6E118CC9CDC6DA2E351AADFD9BAA8CBDD3A76D429A695160D12C923AC9CC3BACA289E193548608B82801,
        0x0606C4A02EA734CC32ACD2B02BC28B99CB3E287E85A763AF267492AB572E99AB3F370D275CEC1DA1AAA9075FF05F79BE,
    ),
)

_B1 = 4
_B2 = fp2_mul_scalar(XI, 4)


def g1_is_on_curve(pt):
    if pt is None:
        return True
    x, y = pt
    return (y * y - (x * x * x + _B1)) % P == 0


def g2_is_on_curve(pt):
    if pt is None:
        return True
    x, y = pt
    return fp2_sub(fp2_sqr(y), fp2_add(fp2_mul(fp2_sqr(x), x), _B2)) == FP2_ZERO


def g1_neg(pt):
    if pt is None:
        return None
    return (pt[0], -pt[1] % P)


def g2_neg(pt):
    if pt is None:
        return None
    return (pt[0], fp2_neg(pt[1]))


def g1_add(p1, p2):
    if p1 is None:
        return p2
    if p2 is None:
        return p1
    x1, y1 = p1
    x2, y2 = p2
    if x1 == x2:
        if (y1 + y2) % P == 0:
            return None
        lam = 3 * x1 * x1 * _inv_mod(2 * y1, P) % P
    else:
        lam = (y2 - y1) * _inv_mod(x2 - x1, P) % P
    x3 = (lam * lam - x1 - x2) % P
    return (x3, (lam * (x1 - x3) - y1) % P)


def g1_mul(pt, k):
    k %= R
    out = None
    add = pt
    while k:
        if k & 1:
            out = g1_add(out, add)
        add = g1_add(add, add)
        k >>= 1
    return out


def g2_add(p1, p2):
    if p1 is None:
        return p2
    if p2 is None:
        return p1
    x1, y1 = p1
    x2, y2 = p2
    if x1 == x2:
        if fp2_add(y1, y2) == FP2_ZERO:
            return None
        lam = fp2_mul(fp2_mul_scalar(fp2_sqr(x1), 3), fp2_inv(fp2_add(y1, y1)))
    else:
        lam = fp2_mul(fp2_sub(y2, y1), fp2_inv(fp2_sub(x2, x1)))
    x3 = fp2_sub(fp2_sqr(lam), fp2_add(x1, x2))
    return (x3, fp2_sub(fp2_mul(lam, fp2_sub(x1, x3)), y1))


def g2_mul(pt, k):
    k %= R
    out = None
    add = pt
    while k:
        if k & 1:
            out = g2_add(out, add)
        add = g2_add(add, add)
        k >>= 1
    return out


def g1_in_subgroup(pt):
    return g1_is_on_curve(pt) and g1_mul(pt, R) is None


def g2_in_subgroup(pt):
    return g2_is_on_curve(pt) and g2_mul(pt, R) is None


# ---------------------------------------------------------------------------
# Optimal-ate Miller loop with affine line functions.
#
# For T, Q on the twist and P = (xP, yP) in G1, the line through the
# untwisted images, cleared of Fp2 denominators, is
#     xi*yP  +  (lam*xT - yT) * w^3  -  (lam*xP) * w^5
# with lam the slope on the twist; Fp2 factors are killed by the final
# exponentiation.

_X_BITS = bin(BLS_X)[3:]  # below the leading bit


def _line(t, q_or_none, p_aff):
    """Slope and resulting point for double (q_or_none=None) or add."""
    xt, yt = t
    if q_or_none is None:
        lam = fp2_mul(fp2_mul_scalar(fp2_sqr(xt), 3), fp2_inv(fp2_add(yt, yt)))
        x3 = fp2_sub(fp2_sqr(lam), fp2_add(xt, xt))
    else:
        xq, yq = q_or_none
        lam = fp2_mul(fp2_sub(yq, yt), fp2_inv(fp2_sub(xq, xt)))
        x3 = fp2_sub(fp2_sqr(lam), fp2_add(xt, xq))
    y3 = fp2_sub(fp2_mul(lam, fp2_sub(xt, x3)), yt)
    return lam, (x3, y3)


def _sparse_mul(f, c0, c3, c5):
    """Multiply f by c0 + c3*w^3 + c5*w^5 (all Fp2)."""
    prod = [FP2_ZERO] * 11
    for i in range(6):
        fi = f[i]
        if fi == FP2_ZERO:
            continue
        prod[i] = fp2_add(prod[i], fp2_mul(fi, c0))
        prod[i + 3] = fp2_add(prod[i + 3], fp2_mul(fi, c3))
        prod[i + 5] = fp2_add(prod[i + 5], fp2_mul(fi, c5))
    out = prod[:6]
    for k in range(10, 5, -1):
        c = prod[k]
        if c != FP2_ZERO:
            out[k - 6] = fp2_add(out[k - 6], fp2_mul(c, XI))
    return tuple(out)


def miller_loop(pairs):
    """Product of Miller loops over [(P_g1, Q_g2), ...]; final exp NOT applied."""
    pairs = [(p, q) for p, q in pairs if p is not None and q is not None]
    if not pairs:
        return FP12_ONE
    state = [q for _, q in pairs]
    f = FP12_ONE
    for bit in _X_BITS:
        f = fp12_sqr(f)
        for idx, (p, q) in enumerate(pairs):
            t = state[idx]
            lam, t2 = _line(t, None, p)
            f = _sparse_mul(
                f,
                fp2_mul_scalar(XI, p[1]),
                fp2_sub(fp2_mul(lam, t[0]), t[1]),
                fp2_mul_scalar(fp2_neg(lam), p[0]),
            )
            state[idx] = t2
        if bit == "1":
            for idx, (p, q) in enumerate(pairs):
                t = state[idx]
                lam, t2 = _line(t, q, p)
                f = _sparse_mul(
                    f,
                    fp2_mul_scalar(XI, p[1]),
                    fp2_sub(fp2_mul(lam, t[0]), t[1]),
                    fp2_mul_scalar(fp2_neg(lam), p[0]),
                )
                state[idx] = t2
    # The BLS parameter is negative: conjugate the accumulated value.
    return fp12_conj(f)


def _pow_x(f):
    """f^|x| using plain squarings (f is in the cyclotomic subgroup)."""
    out = FP12_ONE
    base = f
    e = BLS_X
    while e:
        if e & 1:
            out = fp12_mul(out, base)
        base = fp12_sqr(base)
        e >>= 1
    return out


def final_exponentiation(f):
    # Easy part: f^((p^6 - 1)(p^2 + 1)).
    t = fp12_mul(fp12_conj(f), fp12_inv(f))
    m = fp12_mul(fp12_frobenius(t, 2), t)
    # Hard part: m^((p^4 - p^2 + 1)/r), x-based chain (conjugates absorb the
    # sign of the BLS parameter).
    t2 = fp12_conj(_pow_x(m))
    t3 = fp12_mul(fp12_conj(fp12_sqr(m)), t2)
    t4 = fp12_conj(_pow_x(t3))
    t5 = fp12_conj(_pow_x(t4))
    t6 = fp12_mul(fp12_conj(_pow_x(t5)), fp12_sqr(t2))
    t7 = fp12_conj(_pow_x(t6))
    part1 = fp12_frobenius(fp12_mul(t2, t5), 2)
    part2 = fp12_frobenius(fp12_mul(t4, m), 3)
    part3 = fp12_frobenius(fp12_mul(t6, fp12_conj(m)), 1)
    part4 = fp12_mul(fp12_mul(t7, fp12_conj(t3)), m)
    return fp12_mul(fp12_mul(part1, part2), fp12_mul(part3, part4))


def pairing(p, q):
    """e(P, Q) for P in G1, Q in G2."""
    return final_exponentiation(miller_loop([(p, q)]))


def multi_pairing(pairs):
    """Product of e(P_i, Q_i) with a single shared final exponentiation."""
    return final_exponentiation(miller_loop(pairs))


# ---------------------------------------------------------------------------
# Serialization: fixed-width big-endian, uncompressed.

def _fp_to_bytes(a):
    return int(a).to_bytes(FP_BYTES, "big")


def _fp_from_bytes(b):
    a = int.from_bytes(b, "big")
    if a >= P:
        raise ValueError("field element out of range")
    return a


def g1_to_bytes(pt):
    if pt is None:
        return b"\x00" * (2 * FP_BYTES)
    return _fp_to_bytes(pt[0]) + _fp_to_bytes(pt[1])


def g1_from_bytes(b, allow_infinity=False):
    if len(b) != 2 * FP_BYTES:
        raise ValueError("bad G1 encoding length")
    if b == b"\x00" * (2 * FP_BYTES):
        if allow_infinity:
            return None
        raise ValueError("unexpected point at infinity")
    pt = (_fp_from_bytes(b[:FP_BYTES]), _fp_from_bytes(b[FP_BYTES:]))
    if not g1_is_on_curve(pt):
        raise ValueError("point not on curve")
    return pt


def g2_to_bytes(pt):
    if pt is None:
        return b"\x00" * (4 * FP_BYTES)
    (x0, x1), (y0, y1) = pt
    return _fp_to_bytes(x0) + _fp_to_bytes(x1) + _fp_to_bytes(y0) + _fp_to_bytes(y1)


def g2_from_bytes(b, allow_infinity=False):
    if len(b) != 4 * FP_BYTES:
        raise ValueError("bad G2 encoding length")
    if b == b"\x00" * (4 * FP_BYTES):
        if allow_infinity:
            return None
        raise ValueError("unexpected point at infinity")
    vals = [_fp_from_bytes(b[i * FP_BYTES:(i + 1) * FP_BYTES]) for i in range(4)]
    pt = ((vals[0], vals[1]), (vals[2], vals[3]))
    if not g2_is_on_curve(pt):
        raise ValueError("point not on curve")
    return pt


def fp12_to_bytes(x):
    out = bytearray()
    for c in x:
        out += _fp_to_bytes(c[0])
        out += _fp_to_bytes(c[1])
    return bytes(out)


def fp12_from_bytes(b):
    if len(b) != 12 * FP_BYTES:
        raise ValueError("bad Fp12 encoding length")
    coeffs = []
    for i in range(6):
        off = i * 2 * FP_BYTES
        coeffs.append(
            (
                _fp_from_bytes(b[off:off + FP_BYTES]),
                _fp_from_bytes(b[off + FP_BYTES:off + 2 * FP_BYTES]),
            )
        )
    return tuple(coeffs)


# ---------------------------------------------------------------------------
# Hash to G1: deterministic try-and-increment, then cofactor clearing.  The
# exact byte recipe is part of the wire contract and must match any peer
# implementation bit for bit.

_H2C_TAG = b"poc-abe-h2g1-v1"
_SQRT_EXP = (P + 1) // 4  # valid because p = 3 mod 4


def hash_to_g1(data: bytes):
    for ctr in range(256):
        seed = _H2C_TAG + bytes([ctr]) + data
        wide = hashlib.sha256(b"\x01" + seed).digest() + hashlib.sha256(b"\x02" + seed).digest()
        x = int.from_bytes(wide, "big") % P
        rhs = (x * x * x + _B1) % P
        y = pow(rhs, _SQRT_EXP, P)
        if y * y % P != rhs:
            continue
        y = min(y, P - y)
        pt = g1_mul((x, y), G1_COFACTOR)
        if pt is not None:
            return pt
    raise RuntimeError("hash-to-curve failed to find a point")
