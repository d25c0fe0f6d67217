"""Ciphertext-policy ABE over BLS12-381 (access-tree construction).

Key encapsulation only: encryption shares a fresh secret over the policy's
threshold-gate tree and wraps ``e(g1, g2)^(alpha*s)``; the 256-bit content
key is derived from that group element by hashing.  Per-key randomness ``r``
blinds every issued key, so components of independently issued keys cannot be
recombined (collusion resistance).

Group layout (asymmetric pairing e: G1 x G2 -> GT):

    params:  g1, g2, h = g1^beta, e(g1,g2)^alpha
    key:     D = g2^((alpha + r)/beta),
             per attribute j: Dj = g1^r * H(j)^rj,  Dj' = g2^rj
    kem ct:  Chat = h^s, per leaf x: Cx = g2^(q_x), Cx' = H(att(x))^(q_x)

Leaf decryption pairs to e(g1,g2)^(r*q_x); Lagrange recombination yields
e(g1,g2)^(r*s) and e(Chat, D) divided by it recovers the wrapped element.
"""

from __future__ import annotations

import base64
import hashlib
import json
import secrets
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Tuple

from .. import policy as policy_mod
from ..policy import Gate, Leaf, Node
from . import bls12381 as curve

SCHEME_ID = "cpabe-bsw07-bls12381-v1"
PARAMS_VERSION = 1

RandomSource = Callable[[int], bytes]


class AbeError(Exception):
    pass


class PolicyNotSatisfiedError(AbeError):
    """The key's attribute set does not satisfy the ciphertext policy."""


def _rand_scalar(rng: RandomSource) -> int:
    while True:
        # 48 bytes -> reduction bias below 2^-129, negligible.
        k = int.from_bytes(rng(48), "big") % curve.R
        if k != 0:
            return k


from functools import lru_cache


@lru_cache(maxsize=1024)
def _hash_attr(attr: str):
    return curve.hash_to_g1(b"attr|" + attr.encode())


@dataclass(frozen=True)
class PublicParams:
    scheme_id: str
    version: int
    g1: tuple
    g2: tuple
    h: tuple
    e_gg_alpha: tuple


@dataclass(frozen=True)
class MasterSecret:
    alpha: int
    beta: int


@dataclass(frozen=True)
class UserSecretKey:
    attributes: frozenset
    d: tuple  # G2
    components: Dict[str, Tuple[tuple, tuple]]  # attr -> (Dj in G1, Dj' in G2)


@dataclass(frozen=True)
class KemCiphertext:
    c_hat: tuple  # G1
    shares: Tuple[Tuple[tuple, tuple], ...]  # per policy leaf: (Cx in G2, Cx' in G1)


def setup(rng: RandomSource = secrets.token_bytes) -> Tuple[PublicParams, MasterSecret]:
    alpha = _rand_scalar(rng)
    beta = _rand_scalar(rng)
    g1, g2 = curve.G1_GEN, curve.G2_GEN
    params = PublicParams(
        scheme_id=SCHEME_ID,
        version=PARAMS_VERSION,
        g1=g1,
        g2=g2,
        h=curve.g1_mul(g1, beta),
        e_gg_alpha=curve.pairing(g1, g2) if alpha == 1 else curve.fp12_pow(curve.pairing(g1, g2), alpha),
    )
    return params, MasterSecret(alpha=alpha, beta=beta)


def keygen(msk: MasterSecret, attrs, rng: RandomSource = secrets.token_bytes) -> UserSecretKey:
    attr_set = policy_mod.normalize_attributes(attrs)
    if not attr_set:
        raise AbeError("attribute set must be nonempty")
    r = _rand_scalar(rng)
    beta_inv = curve._inv_mod(msk.beta, curve.R)
    d = curve.g2_mul(curve.G2_GEN, (msk.alpha + r) * beta_inv % curve.R)
    g1_r = curve.g1_mul(curve.G1_GEN, r)
    components = {}
    for attr in sorted(attr_set, key=str):
        rj = _rand_scalar(rng)
        dj = curve.g1_add(g1_r, curve.g1_mul(_hash_attr(str(attr)), rj))
        djp = curve.g2_mul(curve.G2_GEN, rj)
        components[str(attr)] = (dj, djp)
    return UserSecretKey(attributes=attr_set, d=d, components=components)


# ---------------------------------------------------------------------------
# Share handling over the policy tree

def _split_secret(node: Node, secret: int, rng: RandomSource, out: List[Tuple[str, int]]):
    """Assign shares to leaves in left-to-right order."""
    if isinstance(node, Leaf):
        out.append((str(node.attribute), secret))
        return
    coeffs = [secret] + [_rand_scalar(rng) for _ in range(node.k - 1)]
    for i, child in enumerate(node.children, start=1):
        value = 0
        for c in reversed(coeffs):  # Horner at x = i
            value = (value * i + c) % curve.R
        _split_secret(child, value, rng, out)


def _leaf_weights(node: Node, attrs: frozenset) -> Optional[Dict[int, int]]:
    """Lagrange weight (mod r) per usable leaf index, or None if unsatisfied.

    Picks, at each gate, the k satisfied children using the fewest leaves so the
    decryption pairs over a small share subset.
    """
    counter = [0]

    def walk(n: Node) -> Optional[Dict[int, int]]:
        my_index = counter[0]
        if isinstance(n, Leaf):
            counter[0] += 1
            if n.attribute in attrs:
                return {my_index: 1}
            return None
        child_results = []
        for i, child in enumerate(n.children, start=1):
            child_results.append((i, walk(child)))
        usable = [(i, w) for i, w in child_results if w is not None]
        if len(usable) < n.k:
            return None
        usable.sort(key=lambda iw: len(iw[1]))
        chosen = usable[: n.k]
        indices = [i for i, _ in chosen]
        combined: Dict[int, int] = {}
        for i, weights in chosen:
            lagrange = 1
            for j in indices:
                if j != i:
                    lagrange = lagrange * (-j) % curve.R
                    lagrange = lagrange * curve._inv_mod(i - j, curve.R) % curve.R
            for leaf_idx, w in weights.items():
                combined[leaf_idx] = w * lagrange % curve.R
        return combined

    return walk(node)


# ---------------------------------------------------------------------------
# KEM

KEY_BYTES = 32


def _derive_key(gt_element) -> bytes:
    return hashlib.sha256(b"poc-abe-kem-v1" + curve.fp12_to_bytes(gt_element)).digest()


def encrypt_key(
    params: PublicParams, policy: Node, rng: RandomSource = secrets.token_bytes
) -> Tuple[bytes, KemCiphertext]:
    """Fresh content key ABE-wrapped under the policy."""
    leaves = policy_mod.leaves(policy)
    if not leaves:
        raise AbeError("policy has no leaves")
    s = _rand_scalar(rng)
    shares: List[Tuple[str, int]] = []
    _split_secret(policy, s, rng, shares)
    ct_shares = []
    for attr, q in shares:
        cx = curve.g2_mul(params.g2, q)
        cxp = curve.g1_mul(_hash_attr(attr), q)
        ct_shares.append((cx, cxp))
    key = _derive_key(curve.fp12_pow(params.e_gg_alpha, s))
    return key, KemCiphertext(c_hat=curve.g1_mul(params.h, s), shares=tuple(ct_shares))


def decrypt_key(params: PublicParams, usk: UserSecretKey, policy: Node, ct: KemCiphertext) -> bytes:
    """Recover the content key; raises PolicyNotSatisfiedError when the key's
    attributes cannot satisfy the policy, AbeError on inconsistent inputs."""
    leaves = policy_mod.leaves(policy)
    if len(leaves) != len(ct.shares):
        raise AbeError("ciphertext share count does not match policy")
    weights = _leaf_weights(policy, usk.attributes)
    if weights is None:
        raise PolicyNotSatisfiedError("attribute set does not satisfy the policy")
    pairs = [(ct.c_hat, usk.d)]
    for leaf_idx, w in weights.items():
        attr = str(leaves[leaf_idx].attribute)
        comp = usk.components.get(attr)
        if comp is None:
            raise PolicyNotSatisfiedError("key is missing a component for a required attribute")
        dj, djp = comp
        cx, cxp = ct.shares[leaf_idx]
        pairs.append((curve.g1_neg(curve.g1_mul(dj, w)), cx))
        pairs.append((curve.g1_mul(cxp, w), djp))
    return _derive_key(curve.multi_pairing(pairs))


# ---------------------------------------------------------------------------
# Serialization (JSON envelopes with base64 group elements)

def _b64(b: bytes) -> str:
    return base64.b64encode(b).decode()


def _unb64(s: str) -> bytes:
    return base64.b64decode(s.encode())


def params_to_json(params: PublicParams) -> str:
    return json.dumps(
        {
            "scheme_id": params.scheme_id,
            "version": params.version,
            "g1": _b64(curve.g1_to_bytes(params.g1)),
            "g2": _b64(curve.g2_to_bytes(params.g2)),
            "h": _b64(curve.g1_to_bytes(params.h)),
            "e_gg_alpha": _b64(curve.fp12_to_bytes(params.e_gg_alpha)),
        },
        sort_keys=True,
    )


def params_from_json(text: str) -> PublicParams:
    try:
        doc = json.loads(text)
        if doc["scheme_id"] != SCHEME_ID:
            raise AbeError(f"unsupported scheme {doc['scheme_id']!r}")
        return PublicParams(
            scheme_id=doc["scheme_id"],
            version=int(doc["version"]),
            g1=curve.g1_from_bytes(_unb64(doc["g1"])),
            g2=curve.g2_from_bytes(_unb64(doc["g2"])),
            h=curve.g1_from_bytes(_unb64(doc["h"])),
            e_gg_alpha=curve.fp12_from_bytes(_unb64(doc["e_gg_alpha"])),
        )
    except (KeyError, ValueError, TypeError) as e:
        raise AbeError(f"malformed public params: {e}") from None


def key_to_json(usk: UserSecretKey) -> str:
    return json.dumps(
        {
            "attributes": sorted(str(a) for a in usk.attributes),
            "d": _b64(curve.g2_to_bytes(usk.d)),
            "components": {
                attr: {"dj": _b64(curve.g1_to_bytes(dj)), "djp": _b64(curve.g2_to_bytes(djp))}
                for attr, (dj, djp) in sorted(usk.components.items())
            },
        },
        sort_keys=True,
    )


def key_from_json(text: str) -> UserSecretKey:
    try:
        doc = json.loads(text)
        return UserSecretKey(
            attributes=policy_mod.normalize_attributes(doc["attributes"]),
            d=curve.g2_from_bytes(_unb64(doc["d"])),
            components={
                attr: (
                    curve.g1_from_bytes(_unb64(c["dj"])),
                    curve.g2_from_bytes(_unb64(c["djp"])),
                )
                for attr, c in doc["components"].items()
            },
        )
    except (KeyError, ValueError, TypeError) as e:
        raise AbeError(f"malformed user key: {e}") from None


def seeded_rng(seed: int) -> RandomSource:
    """Deterministic randomness for reproducible fixtures.  Test use only —
    never wire this into a release configuration."""
    import random

    r = random.Random(seed)
    return lambda n: r.randbytes(n)
