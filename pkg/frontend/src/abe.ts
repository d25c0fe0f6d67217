// Ciphertext-policy ABE key encapsulation over BLS12-381, wire-compatible
// with the CLI implementation: same public-parameter and user-key JSON
// formats, same hash-to-G1 recipe, same GT-to-key derivation.  The browser
// side never holds the master secret — it only encapsulates fresh content
// keys under a policy and decapsulates with an issued user key.

import { bls12_381 } from "@noble/curves/bls12-381.js";
import { sha256 } from "@noble/hashes/sha2.js";
import {
  FP_BYTES,
  Fp12W,
  P,
  R,
  bytesToBig,
  fp12FromBytes,
  fp12Pow,
  fp12ToBytes,
  fpFromBytes,
  fpToBytes,
  invMod,
  mod,
  modPow,
} from "./fp.js";
import { PolicyNode, leaves } from "./policy.js";

export const SCHEME_ID = "cpabe-bsw07-bls12381-v1";
export const KEY_BYTES = 32;
export const G1_LEN = 2 * FP_BYTES; // uncompressed x || y
export const G2_LEN = 4 * FP_BYTES; // x0 || x1 || y0 || y1

const G1Point = bls12_381.G1.Point;
const G2Point = bls12_381.G2.Point;
type G1 = InstanceType<typeof G1Point>;
type G2 = InstanceType<typeof G2Point>;

export class AbeError extends Error {}
export class PolicyNotSatisfiedError extends AbeError {}

export type RandomSource = (n: number) => Uint8Array;

export const defaultRandom: RandomSource = (n) => crypto.getRandomValues(new Uint8Array(n));

export interface PublicParams {
  schemeId: string;
  version: number;
  g1: G1;
  g2: G2;
  h: G1;
  eGGAlpha: Fp12W;
}

export interface UserSecretKey {
  attributes: string[];
  d: G2;
  components: Map<string, { dj: G1; djp: G2 }>;
}

export interface KemCiphertext {
  cHat: G1;
  shares: { cx: G2; cxp: G1 }[];
}

// ---------------------------------------------------------------------------
// Group element codecs (raw big-endian field elements, no flag bits)

export function g1ToBytes(p: G1): Uint8Array {
  const a = p.toAffine();
  const out = new Uint8Array(G1_LEN);
  out.set(fpToBytes(a.x), 0);
  out.set(fpToBytes(a.y), FP_BYTES);
  return out;
}

export function g1FromBytes(b: Uint8Array): G1 {
  if (b.length !== G1_LEN) throw new AbeError("bad G1 encoding length");
  const p = G1Point.fromAffine({ x: fpFromBytes(b.subarray(0, FP_BYTES)), y: fpFromBytes(b.subarray(FP_BYTES)) });
  p.assertValidity();
  return p;
}

export function g2ToBytes(p: G2): Uint8Array {
  const a = p.toAffine();
  const out = new Uint8Array(G2_LEN);
  out.set(fpToBytes(a.x.c0), 0);
  out.set(fpToBytes(a.x.c1), FP_BYTES);
  out.set(fpToBytes(a.y.c0), 2 * FP_BYTES);
  out.set(fpToBytes(a.y.c1), 3 * FP_BYTES);
  return out;
}

export function g2FromBytes(b: Uint8Array): G2 {
  if (b.length !== G2_LEN) throw new AbeError("bad G2 encoding length");
  const vals = [0, 1, 2, 3].map((i) => fpFromBytes(b.subarray(i * FP_BYTES, (i + 1) * FP_BYTES)));
  const p = G2Point.fromAffine({ x: { c0: vals[0], c1: vals[1] }, y: { c0: vals[2], c1: vals[3] } });
  p.assertValidity();
  return p;
}

// noble's Fp12 is the Fp6[w] tower; coefficient of w^i lives at c(i%2).c(i>>1).
function towerToW(e: any): Fp12W {
  const out: Fp12W = [];
  for (let i = 0; i < 6; i++) {
    const c = (i % 2 === 0 ? e.c0 : e.c1)[`c${i >> 1}`];
    out.push([c.c0, c.c1]);
  }
  return out;
}

// ---------------------------------------------------------------------------
// Hash to G1: deterministic try-and-increment + cofactor clearing, matching
// the CLI recipe byte for byte.

const H2C_TAG = new TextEncoder().encode("poc-abe-h2g1-v1");
const SQRT_EXP = (P + 1n) / 4n;
const G1_COFACTOR = 0x396c8c005555e1568c00aaab0000aaabn;

function concatBytes(...parts: Uint8Array[]): Uint8Array {
  const out = new Uint8Array(parts.reduce((n, p) => n + p.length, 0));
  let off = 0;
  for (const p of parts) {
    out.set(p, off);
    off += p.length;
  }
  return out;
}

export function hashToG1(data: Uint8Array): G1 {
  for (let ctr = 0; ctr < 256; ctr++) {
    const seed = concatBytes(H2C_TAG, Uint8Array.of(ctr), data);
    const wide = concatBytes(sha256(concatBytes(Uint8Array.of(1), seed)), sha256(concatBytes(Uint8Array.of(2), seed)));
    const x = mod(bytesToBig(wide), P);
    const rhs = mod(x * x * x + 4n, P);
    let y = modPow(rhs, SQRT_EXP, P);
    if ((y * y) % P !== rhs) continue;
    if (y > P - y) y = P - y;
    const pt = G1Point.fromAffine({ x, y }).multiplyUnsafe(G1_COFACTOR);
    if (!pt.is0()) return pt;
  }
  throw new AbeError("hash-to-curve failed to find a point");
}

const attrPointCache = new Map<string, G1>();

function hashAttr(attr: string): G1 {
  let p = attrPointCache.get(attr);
  if (!p) {
    p = hashToG1(new TextEncoder().encode(`attr|${attr}`));
    attrPointCache.set(attr, p);
  }
  return p;
}

// ---------------------------------------------------------------------------
// JSON codecs (same shape the key authority serves)

const b64decode = (s: string): Uint8Array => Uint8Array.from(atob(s), (c) => c.charCodeAt(0));

export function paramsFromJson(doc: any): PublicParams {
  if (doc.scheme_id !== SCHEME_ID) throw new AbeError(`unsupported scheme ${doc.scheme_id}`);
  return {
    schemeId: doc.scheme_id,
    version: doc.version,
    g1: g1FromBytes(b64decode(doc.g1)),
    g2: g2FromBytes(b64decode(doc.g2)),
    h: g1FromBytes(b64decode(doc.h)),
    eGGAlpha: fp12FromBytes(b64decode(doc.e_gg_alpha)),
  };
}

export function keyFromJson(doc: any): UserSecretKey {
  const components = new Map<string, { dj: G1; djp: G2 }>();
  for (const [attr, c] of Object.entries<any>(doc.components)) {
    components.set(attr, { dj: g1FromBytes(b64decode(c.dj)), djp: g2FromBytes(b64decode(c.djp)) });
  }
  return { attributes: doc.attributes, d: g2FromBytes(b64decode(doc.d)), components };
}

// ---------------------------------------------------------------------------
// KEM

function randScalar(rand: RandomSource): bigint {
  for (;;) {
    const k = mod(bytesToBig(rand(48)), R);
    if (k !== 0n) return k;
  }
}

function deriveKey(gt: Fp12W): Uint8Array {
  return sha256(concatBytes(new TextEncoder().encode("poc-abe-kem-v1"), fp12ToBytes(gt)));
}

function splitSecret(node: PolicyNode, secret: bigint, rand: RandomSource, out: { attr: string; q: bigint }[]) {
  if (node.kind === "leaf") {
    out.push({ attr: node.attribute, q: secret });
    return;
  }
  const coeffs = [secret];
  for (let i = 1; i < node.k; i++) coeffs.push(randScalar(rand));
  node.children.forEach((child, idx) => {
    const x = BigInt(idx + 1);
    let value = 0n;
    for (let c = coeffs.length - 1; c >= 0; c--) value = mod(value * x + coeffs[c], R);
    splitSecret(child, value, rand, out);
  });
}

/** Lagrange weight per usable leaf index, or null when unsatisfied. */
function leafWeights(node: PolicyNode, attrs: Set<string>): Map<number, bigint> | null {
  let counter = 0;
  const walk = (n: PolicyNode): Map<number, bigint> | null => {
    if (n.kind === "leaf") {
      const idx = counter++;
      return attrs.has(n.attribute) ? new Map([[idx, 1n]]) : null;
    }
    const usable: { i: bigint; w: Map<number, bigint> }[] = [];
    n.children.forEach((child, idx) => {
      const w = walk(child);
      if (w !== null) usable.push({ i: BigInt(idx + 1), w });
    });
    if (usable.length < n.k) return null;
    usable.sort((a, b) => a.w.size - b.w.size);
    const chosen = usable.slice(0, n.k);
    const indices = chosen.map((c) => c.i);
    const combined = new Map<number, bigint>();
    for (const { i, w } of chosen) {
      let lagrange = 1n;
      for (const j of indices) {
        if (j !== i) lagrange = mod(lagrange * mod(-j, R) * invMod(i - j, R), R);
      }
      for (const [leafIdx, wv] of w) combined.set(leafIdx, mod(wv * lagrange, R));
    }
    return combined;
  };
  return walk(node);
}

export function encryptKey(
  params: PublicParams,
  policy: PolicyNode,
  rand: RandomSource = defaultRandom,
): { key: Uint8Array; ct: KemCiphertext } {
  if (leaves(policy).length === 0) throw new AbeError("policy has no leaves");
  const s = randScalar(rand);
  const shares: { attr: string; q: bigint }[] = [];
  splitSecret(policy, s, rand, shares);
  const ct: KemCiphertext = {
    cHat: params.h.multiply(s),
    shares: shares.map(({ attr, q }) => ({ cx: params.g2.multiply(q), cxp: hashAttr(attr).multiply(q) })),
  };
  return { key: deriveKey(fp12Pow(params.eGGAlpha, s)), ct };
}

export function decryptKey(
  params: PublicParams,
  usk: UserSecretKey,
  policy: PolicyNode,
  ct: KemCiphertext,
): Uint8Array {
  const policyLeaves = leaves(policy);
  if (policyLeaves.length !== ct.shares.length) {
    throw new AbeError("ciphertext share count does not match policy");
  }
  const weights = leafWeights(policy, new Set(usk.attributes));
  if (weights === null) throw new PolicyNotSatisfiedError("attribute set does not satisfy the policy");
  const pairs: { g1: G1; g2: G2 }[] = [{ g1: ct.cHat, g2: usk.d }];
  for (const [leafIdx, w] of weights) {
    const attr = policyLeaves[leafIdx].attribute;
    const comp = usk.components.get(attr);
    if (!comp) throw new PolicyNotSatisfiedError("key is missing a component for a required attribute");
    const { cx, cxp } = ct.shares[leafIdx];
    pairs.push({ g1: comp.dj.multiply(w).negate(), g2: cx });
    pairs.push({ g1: cxp.multiply(w), g2: comp.djp });
  }
  return deriveKey(towerToW(bls12_381.pairingBatch(pairs)));
}
