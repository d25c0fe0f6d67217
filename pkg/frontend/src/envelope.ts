// "PCE1" binary envelope codec: ABE-wrapped AES-256-GCM payload with an
// authenticated header and a trailing whole-message SHA-256 checksum.  The
// byte layout is the interchange format with the CLI — envelopes sealed on
// either side open on the other.
//
//   magic "PCE1" | version u16 LE | header_len u32 LE | header | body | sha256
//   header: policy_len u32, policy utf-8, scheme_len u16, scheme,
//           ptype_len u16, ptype, abe_len u32, KEM ciphertext
//   KEM:    Chat (96B G1), leaf_count u16, per leaf Cx (192B G2) Cx' (96B G1)
//   body:   nonce_len u16, nonce, ct_len u32, ciphertext || GCM tag

import { sha256 } from "@noble/hashes/sha2.js";
import * as abe from "./abe.js";
import * as policyMod from "./policy.js";

export const MAGIC = new TextEncoder().encode("PCE1");
export const VERSION = 1;
export const NONCE_BYTES = 12;
export const DIGEST_BYTES = 32;
export const MAX_PAYLOAD_BYTES = 16 * 1024 * 1024;

export class EnvelopeError extends Error {}
export class IntegrityError extends EnvelopeError {}
export class AccessDeniedError extends EnvelopeError {}

export interface EnvelopeHeader {
  policyText: string;
  schemeId: string;
  payloadType: string;
  kem: abe.KemCiphertext;
}

function concat(...parts: Uint8Array[]): Uint8Array {
  const out = new Uint8Array(parts.reduce((n, p) => n + p.length, 0));
  let off = 0;
  for (const p of parts) {
    out.set(p, off);
    off += p.length;
  }
  return out;
}

const u16 = (v: number) => {
  const b = new Uint8Array(2);
  new DataView(b.buffer).setUint16(0, v, true);
  return b;
};
const u32 = (v: number) => {
  const b = new Uint8Array(4);
  new DataView(b.buffer).setUint32(0, v, true);
  return b;
};

function kemToBytes(kem: abe.KemCiphertext): Uint8Array {
  const parts = [abe.g1ToBytes(kem.cHat), u16(kem.shares.length)];
  for (const { cx, cxp } of kem.shares) {
    parts.push(abe.g2ToBytes(cx), abe.g1ToBytes(cxp));
  }
  return concat(...parts);
}

function kemFromBytes(data: Uint8Array): abe.KemCiphertext {
  if (data.length < abe.G1_LEN + 2) throw new IntegrityError("truncated KEM ciphertext");
  try {
    const cHat = abe.g1FromBytes(data.subarray(0, abe.G1_LEN));
    const count = new DataView(data.buffer, data.byteOffset + abe.G1_LEN, 2).getUint16(0, true);
    let off = abe.G1_LEN + 2;
    if (data.length !== off + count * (abe.G2_LEN + abe.G1_LEN)) {
      throw new IntegrityError("KEM ciphertext length mismatch");
    }
    const shares = [];
    for (let i = 0; i < count; i++) {
      const cx = abe.g2FromBytes(data.subarray(off, off + abe.G2_LEN));
      off += abe.G2_LEN;
      const cxp = abe.g1FromBytes(data.subarray(off, off + abe.G1_LEN));
      off += abe.G1_LEN;
      shares.push({ cx, cxp });
    }
    return { cHat, shares };
  } catch (e) {
    if (e instanceof IntegrityError) throw e;
    throw new IntegrityError(`bad group element: ${(e as Error).message}`);
  }
}

export async function seal(
  params: abe.PublicParams,
  policy: policyMod.PolicyNode | string,
  payload: Uint8Array,
  payloadType = "application/fhir+json",
  rand: abe.RandomSource = abe.defaultRandom,
): Promise<Uint8Array> {
  if (payload.length > MAX_PAYLOAD_BYTES) throw new EnvelopeError(`payload exceeds ${MAX_PAYLOAD_BYTES} bytes`);
  const node = typeof policy === "string" ? policyMod.parse(policy) : policy;
  const { key, ct } = abe.encryptKey(params, node, rand);
  const enc = new TextEncoder();
  const policyBytes = enc.encode(policyMod.render(node));
  const schemeBytes = enc.encode(params.schemeId);
  const ptypeBytes = enc.encode(payloadType);
  const kemBytes = kemToBytes(ct);
  const header = concat(
    u32(policyBytes.length), policyBytes,
    u16(schemeBytes.length), schemeBytes,
    u16(ptypeBytes.length), ptypeBytes,
    u32(kemBytes.length), kemBytes,
  );
  const prefix = concat(MAGIC, u16(VERSION), u32(header.length), header);
  const nonce = rand(NONCE_BYTES);
  const cryptoKey = await crypto.subtle.importKey("raw", key as BufferSource, "AES-GCM", false, ["encrypt"]);
  const ciphertext = new Uint8Array(
    await crypto.subtle.encrypt(
      { name: "AES-GCM", iv: nonce as BufferSource, additionalData: prefix as BufferSource },
      cryptoKey,
      payload as BufferSource,
    ),
  );
  const blob = concat(prefix, u16(NONCE_BYTES), nonce, u32(ciphertext.length), ciphertext);
  return concat(blob, sha256(blob));
}

export function parseHeader(data: Uint8Array): EnvelopeHeader {
  if (data.length < MAGIC.length + 6 + DIGEST_BYTES) throw new IntegrityError("envelope too short");
  const blob = data.subarray(0, data.length - DIGEST_BYTES);
  const digest = data.subarray(data.length - DIGEST_BYTES);
  const computed = sha256(blob);
  if (computed.length !== digest.length || !computed.every((b, i) => b === digest[i])) {
    throw new IntegrityError("envelope checksum mismatch");
  }
  if (!MAGIC.every((b, i) => b === blob[i])) throw new IntegrityError("bad magic");
  const view = new DataView(blob.buffer, blob.byteOffset, blob.byteLength);
  const version = view.getUint16(4, true);
  if (version !== VERSION) throw new IntegrityError(`unsupported envelope version ${version}`);
  const headerLen = view.getUint32(6, true);
  if (blob.length < 10 + headerLen) throw new IntegrityError("truncated header");
  const header = blob.subarray(10, 10 + headerLen);
  const hview = new DataView(header.buffer, header.byteOffset, header.byteLength);
  const dec = new TextDecoder("utf-8", { fatal: true });
  try {
    let off = 0;
    const policyLen = hview.getUint32(off, true);
    off += 4;
    const policyText = dec.decode(header.subarray(off, off + policyLen));
    off += policyLen;
    const schemeLen = hview.getUint16(off, true);
    off += 2;
    const schemeId = dec.decode(header.subarray(off, off + schemeLen));
    off += schemeLen;
    const ptypeLen = hview.getUint16(off, true);
    off += 2;
    const payloadType = dec.decode(header.subarray(off, off + ptypeLen));
    off += ptypeLen;
    const abeLen = hview.getUint32(off, true);
    off += 4;
    const kemBytes = header.subarray(off, off + abeLen);
    if (kemBytes.length !== abeLen || off + abeLen !== header.length) {
      throw new IntegrityError("header length mismatch");
    }
    if (schemeId !== abe.SCHEME_ID) throw new IntegrityError(`unsupported scheme ${schemeId}`);
    return { policyText, schemeId, payloadType, kem: kemFromBytes(kemBytes) };
  } catch (e) {
    if (e instanceof EnvelopeError) throw e;
    throw new IntegrityError(`malformed header: ${(e as Error).message}`);
  }
}

export async function openEnvelope(
  params: abe.PublicParams,
  usk: abe.UserSecretKey,
  data: Uint8Array,
): Promise<Uint8Array> {
  const header = parseHeader(data);
  let node: policyMod.PolicyNode;
  try {
    node = policyMod.parse(header.policyText);
  } catch (e) {
    throw new IntegrityError(`undecodable policy in header: ${(e as Error).message}`);
  }
  let contentKey: Uint8Array;
  try {
    contentKey = abe.decryptKey(params, usk, node, header.kem);
  } catch (e) {
    if (e instanceof abe.PolicyNotSatisfiedError) throw new AccessDeniedError((e as Error).message);
    throw new IntegrityError((e as Error).message);
  }
  const blob = data.subarray(0, data.length - DIGEST_BYTES);
  const headerLen = new DataView(blob.buffer, blob.byteOffset, blob.byteLength).getUint32(6, true);
  const prefix = blob.subarray(0, 10 + headerLen);
  const body = blob.subarray(10 + headerLen);
  const bview = new DataView(body.buffer, body.byteOffset, body.byteLength);
  if (body.length < 6) throw new IntegrityError("malformed body");
  const nonceLen = bview.getUint16(0, true);
  const nonce = body.subarray(2, 2 + nonceLen);
  if (body.length < 6 + nonceLen) throw new IntegrityError("malformed body");
  const ctLen = bview.getUint32(2 + nonceLen, true);
  const ciphertext = body.subarray(6 + nonceLen, 6 + nonceLen + ctLen);
  if (nonce.length !== nonceLen || ciphertext.length !== ctLen || 6 + nonceLen + ctLen !== body.length) {
    throw new IntegrityError("body length mismatch");
  }
  try {
    const cryptoKey = await crypto.subtle.importKey("raw", contentKey as BufferSource, "AES-GCM", false, ["decrypt"]);
    const plain = await crypto.subtle.decrypt(
      { name: "AES-GCM", iv: nonce as BufferSource, additionalData: prefix as BufferSource },
      cryptoKey,
      ciphertext as BufferSource,
    );
    return new Uint8Array(plain);
  } catch {
    throw new IntegrityError("authenticated decryption failed");
  }
}
