// Minimal BLS12-381 tower-field helpers for the GT (Fp12) side of the ABE
// scheme.  Fp12 elements are kept in the w-basis: six Fp2 coefficients of
// w^0..w^5 with w^6 = u + 1.  That is also the canonical serialization order
// (each Fp2 as two 48-byte big-endian Fp values, c0 then c1), shared with the
// CLI implementation, so GT hashing is bit-compatible across clients.

export const P =
  0x1a0111ea397fe69a4b1ba7b6434bacd764774b84f38512bf6730d2a0f6b0f6241eabfffeb153ffffb9feffffffffaaabn;
export const R = 0x73eda753299d7d483339d80809a1d80553bda402fffe5bfeffffffff00000001n;
export const FP_BYTES = 48;

export type Fp2 = [bigint, bigint]; // c0 + c1*u
export type Fp12W = Fp2[]; // length 6

export function mod(a: bigint, m: bigint): bigint {
  const r = a % m;
  return r < 0n ? r + m : r;
}

export function modPow(base: bigint, exp: bigint, m: bigint): bigint {
  let result = 1n;
  let b = mod(base, m);
  let e = exp;
  while (e > 0n) {
    if (e & 1n) result = (result * b) % m;
    b = (b * b) % m;
    e >>= 1n;
  }
  return result;
}

export function invMod(a: bigint, m: bigint): bigint {
  // extended Euclid
  let [old_r, r] = [mod(a, m), m];
  let [old_s, s] = [1n, 0n];
  while (r !== 0n) {
    const q = old_r / r;
    [old_r, r] = [r, old_r - q * r];
    [old_s, s] = [s, old_s - q * s];
  }
  if (old_r !== 1n) throw new Error("not invertible");
  return mod(old_s, m);
}

export function fp2Add(x: Fp2, y: Fp2): Fp2 {
  return [mod(x[0] + y[0], P), mod(x[1] + y[1], P)];
}

export function fp2Mul(x: Fp2, y: Fp2): Fp2 {
  // (a + bu)(c + du) = (ac - bd) + (ad + bc)u with u^2 = -1
  const ac = x[0] * y[0];
  const bd = x[1] * y[1];
  const ad_bc = (x[0] + x[1]) * (y[0] + y[1]) - ac - bd;
  return [mod(ac - bd, P), mod(ad_bc, P)];
}

const XI: Fp2 = [1n, 1n]; // w^6 = u + 1
const FP2_ZERO: Fp2 = [0n, 0n];

export const FP12_ONE: Fp12W = [[1n, 0n], FP2_ZERO, FP2_ZERO, FP2_ZERO, FP2_ZERO, FP2_ZERO];

export function fp12Mul(x: Fp12W, y: Fp12W): Fp12W {
  const prod: Fp2[] = Array.from({ length: 11 }, () => FP2_ZERO);
  for (let i = 0; i < 6; i++) {
    if (x[i][0] === 0n && x[i][1] === 0n) continue;
    for (let j = 0; j < 6; j++) {
      if (y[j][0] === 0n && y[j][1] === 0n) continue;
      prod[i + j] = fp2Add(prod[i + j], fp2Mul(x[i], y[j]));
    }
  }
  const out = prod.slice(0, 6);
  for (let k = 10; k > 5; k--) {
    if (prod[k][0] === 0n && prod[k][1] === 0n) continue;
    out[k - 6] = fp2Add(out[k - 6], fp2Mul(prod[k], XI));
  }
  return out;
}

export function fp12Pow(x: Fp12W, e: bigint): Fp12W {
  let result = FP12_ONE;
  let b = x;
  let n = e;
  while (n > 0n) {
    if (n & 1n) result = fp12Mul(result, b);
    b = fp12Mul(b, b);
    n >>= 1n;
  }
  return result;
}

// ---------------------------------------------------------------------------
// Byte codecs

export function fpToBytes(x: bigint): Uint8Array {
  const out = new Uint8Array(FP_BYTES);
  let v = x;
  for (let i = FP_BYTES - 1; i >= 0; i--) {
    out[i] = Number(v & 0xffn);
    v >>= 8n;
  }
  return out;
}

export function bytesToBig(b: Uint8Array): bigint {
  let v = 0n;
  for (const byte of b) v = (v << 8n) | BigInt(byte);
  return v;
}

export function fpFromBytes(b: Uint8Array): bigint {
  const v = bytesToBig(b);
  if (v >= P) throw new Error("field element out of range");
  return v;
}

export function fp12ToBytes(x: Fp12W): Uint8Array {
  const out = new Uint8Array(12 * FP_BYTES);
  for (let i = 0; i < 6; i++) {
    out.set(fpToBytes(x[i][0]), i * 2 * FP_BYTES);
    out.set(fpToBytes(x[i][1]), (i * 2 + 1) * FP_BYTES);
  }
  return out;
}

export function fp12FromBytes(b: Uint8Array): Fp12W {
  if (b.length !== 12 * FP_BYTES) throw new Error("bad Fp12 encoding length");
  const out: Fp12W = [];
  for (let i = 0; i < 6; i++) {
    out.push([
      fpFromBytes(b.subarray(i * 2 * FP_BYTES, (i * 2 + 1) * FP_BYTES)),
      fpFromBytes(b.subarray((i * 2 + 1) * FP_BYTES, (i * 2 + 2) * FP_BYTES)),
    ]);
  }
  return out;
}
