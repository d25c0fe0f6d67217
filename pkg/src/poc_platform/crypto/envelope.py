"""Self-describing binary envelope: ABE-wrapped key + AES-256-GCM payload.

Wire layout (all integers little-endian):

    magic  "PCE1"
    version            u16
    header_len         u32
    header:
        policy_len     u32   canonical policy string, UTF-8
        scheme_len     u16   scheme identifier, ASCII
        ptype_len      u16   payload type, UTF-8
        abe_len        u32   KEM ciphertext (see below)
    nonce_len          u16   (12 for GCM)
    nonce
    ct_len             u32
    ciphertext || GCM tag (16 bytes)
    sha256 digest of every preceding byte (32 bytes)

KEM ciphertext: Chat (96-byte uncompressed G1), leaf_count u16, then per
policy leaf in left-to-right order Cx (192-byte G2) and Cx' (96-byte G1).

The GCM additional data covers magic through header, so policy or header
tampering breaks authenticated decryption.  The trailing plain digest makes
*any* single-byte corruption detectable up front, including corruption that
would otherwise surface as a policy mismatch.
"""

from __future__ import annotations

import hashlib
import secrets
import struct
from dataclasses import dataclass

from cryptography.exceptions import InvalidTag
from cryptography.hazmat.primitives.ciphers.aead import AESGCM

from .. import policy as policy_mod
from . import abe, bls12381 as curve

MAGIC = b"PCE1"
VERSION = 1
NONCE_BYTES = 12
DIGEST_BYTES = 32
MAX_PAYLOAD_BYTES = 16 * 1024 * 1024

G1_LEN = 96
G2_LEN = 192


class EnvelopeError(Exception):
    pass


class IntegrityError(EnvelopeError):
    """The envelope bytes have been corrupted or tampered with."""


class AccessDeniedError(EnvelopeError):
    """The supplied key cannot satisfy the envelope's policy."""


@dataclass(frozen=True)
class EnvelopeHeader:
    policy_text: str
    scheme_id: str
    payload_type: str
    kem: abe.KemCiphertext


def _kem_to_bytes(kem: abe.KemCiphertext) -> bytes:
    out = bytearray(curve.g1_to_bytes(kem.c_hat))
    out += struct.pack("<H", len(kem.shares))
    for cx, cxp in kem.shares:
        out += curve.g2_to_bytes(cx)
        out += curve.g1_to_bytes(cxp)
    return bytes(out)


def _kem_from_bytes(data: bytes) -> abe.KemCiphertext:
    if len(data) < G1_LEN + 2:
        raise IntegrityError("truncated KEM ciphertext")
    c_hat = curve.g1_from_bytes(data[:G1_LEN])
    (count,) = struct.unpack_from("<H", data, G1_LEN)
    off = G1_LEN + 2
    if len(data) != off + count * (G2_LEN + G1_LEN):
        raise IntegrityError("KEM ciphertext length mismatch")
    shares = []
    for _ in range(count):
        cx = curve.g2_from_bytes(data[off:off + G2_LEN])
        off += G2_LEN
        cxp = curve.g1_from_bytes(data[off:off + G1_LEN])
        off += G1_LEN
        shares.append((cx, cxp))
    return abe.KemCiphertext(c_hat=c_hat, shares=tuple(shares))


def seal(
    params: abe.PublicParams,
    policy_node,
    payload: bytes,
    payload_type: str = "application/fhir+json",
    rng: abe.RandomSource = secrets.token_bytes,
) -> bytes:
    """Encrypt payload under the policy; returns the full envelope bytes."""
    if len(payload) > MAX_PAYLOAD_BYTES:
        raise EnvelopeError(f"payload exceeds {MAX_PAYLOAD_BYTES} bytes")
    if isinstance(policy_node, str):
        policy_node = policy_mod.parse(policy_node)
    content_key, kem = abe.encrypt_key(params, policy_node, rng)
    policy_bytes = policy_mod.render(policy_node).encode()
    scheme_bytes = params.scheme_id.encode()
    ptype_bytes = payload_type.encode()
    kem_bytes = _kem_to_bytes(kem)
    header = b"".join(
        [
            struct.pack("<I", len(policy_bytes)), policy_bytes,
            struct.pack("<H", len(scheme_bytes)), scheme_bytes,
            struct.pack("<H", len(ptype_bytes)), ptype_bytes,
            struct.pack("<I", len(kem_bytes)), kem_bytes,
        ]
    )
    prefix = MAGIC + struct.pack("<HI", VERSION, len(header)) + header
    nonce = rng(NONCE_BYTES)
    ciphertext = AESGCM(content_key).encrypt(nonce, payload, prefix)
    body = struct.pack("<H", NONCE_BYTES) + nonce + struct.pack("<I", len(ciphertext)) + ciphertext
    blob = prefix + body
    return blob + hashlib.sha256(blob).digest()


def parse_header(data: bytes) -> EnvelopeHeader:
    """Parse and structurally validate an envelope without decrypting.

    Raises IntegrityError on corruption (checksum, framing, bad group
    elements); never needs key material.
    """
    if len(data) < len(MAGIC) + 6 + DIGEST_BYTES:
        raise IntegrityError("envelope too short")
    blob, digest = data[:-DIGEST_BYTES], data[-DIGEST_BYTES:]
    if hashlib.sha256(blob).digest() != digest:
        raise IntegrityError("envelope checksum mismatch")
    if blob[:4] != MAGIC:
        raise IntegrityError("bad magic")
    version, header_len = struct.unpack_from("<HI", blob, 4)
    if version != VERSION:
        raise IntegrityError(f"unsupported envelope version {version}")
    off = 10
    if len(blob) < off + header_len:
        raise IntegrityError("truncated header")
    header = blob[off:off + header_len]

    try:
        hoff = 0
        (policy_len,) = struct.unpack_from("<I", header, hoff)
        hoff += 4
        policy_text = header[hoff:hoff + policy_len].decode("utf-8")
        hoff += policy_len
        (scheme_len,) = struct.unpack_from("<H", header, hoff)
        hoff += 2
        scheme_id = header[hoff:hoff + scheme_len].decode("ascii")
        hoff += scheme_len
        (ptype_len,) = struct.unpack_from("<H", header, hoff)
        hoff += 2
        payload_type = header[hoff:hoff + ptype_len].decode("utf-8")
        hoff += ptype_len
        (abe_len,) = struct.unpack_from("<I", header, hoff)
        hoff += 4
        kem_bytes = header[hoff:hoff + abe_len]
        if len(kem_bytes) != abe_len or hoff + abe_len != len(header):
            raise IntegrityError("header length mismatch")
    except (struct.error, UnicodeDecodeError) as e:
        raise IntegrityError(f"malformed header: {e}") from None
    if scheme_id != abe.SCHEME_ID:
        raise IntegrityError(f"unsupported scheme {scheme_id!r}")
    return EnvelopeHeader(
        policy_text=policy_text,
        scheme_id=scheme_id,
        payload_type=payload_type,
        kem=_kem_from_bytes(kem_bytes),
    )


def open_envelope(params: abe.PublicParams, usk: abe.UserSecretKey, data: bytes) -> bytes:
    """Decrypt an envelope.

    Raises AccessDeniedError when the key's attributes do not satisfy the
    policy, IntegrityError for any corruption or tampering; on success returns
    the exact original payload bytes.
    """
    header = parse_header(data)
    try:
        policy_node = policy_mod.parse(header.policy_text)
    except policy_mod.PolicyError as e:
        raise IntegrityError(f"undecodable policy in header: {e}") from None
    try:
        content_key = abe.decrypt_key(params, usk, policy_node, header.kem)
    except abe.PolicyNotSatisfiedError as e:
        raise AccessDeniedError(str(e)) from None
    except abe.AbeError as e:
        raise IntegrityError(str(e)) from None

    blob = data[:-DIGEST_BYTES]
    version, header_len = struct.unpack_from("<HI", blob, 4)
    prefix_len = 10 + header_len
    prefix = blob[:prefix_len]
    body = blob[prefix_len:]
    try:
        (nonce_len,) = struct.unpack_from("<H", body, 0)
        nonce = body[2:2 + nonce_len]
        (ct_len,) = struct.unpack_from("<I", body, 2 + nonce_len)
        ciphertext = body[6 + nonce_len:6 + nonce_len + ct_len]
        if len(nonce) != nonce_len or len(ciphertext) != ct_len or 6 + nonce_len + ct_len != len(body):
            raise IntegrityError("body length mismatch")
    except struct.error as e:
        raise IntegrityError(f"malformed body: {e}") from None
    try:
        return AESGCM(content_key).decrypt(nonce, ciphertext, prefix)
    except InvalidTag:
        raise IntegrityError("authenticated decryption failed") from None
