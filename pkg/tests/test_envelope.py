import os

import pytest

from poc_platform import policy
from poc_platform.crypto import abe, envelope
from poc_platform.crypto.envelope import AccessDeniedError, EnvelopeError, IntegrityError


@pytest.fixture(scope="module")
def keys(abe_setup):
    params, msk = abe_setup
    return {
        "cardio": abe.keygen(msk, ["role:doctor", "dept:cardiology"], abe.seeded_rng(101)),
        "derma": abe.keygen(msk, ["role:doctor", "dept:dermatology"], abe.seeded_rng(102)),
    }


POLICY = "role:doctor AND dept:cardiology"


class TestSealOpen:
    def test_roundtrip(self, abe_setup, keys):
        params, _ = abe_setup
        env = envelope.seal(params, POLICY, b"payload", rng=abe.seeded_rng(1))
        assert envelope.open_envelope(params, keys["cardio"], env) == b"payload"

    def test_empty_payload(self, abe_setup, keys):
        params, _ = abe_setup
        env = envelope.seal(params, POLICY, b"")
        assert envelope.open_envelope(params, keys["cardio"], env) == b""

    def test_large_payload_roundtrip(self, abe_setup, keys):
        params, _ = abe_setup
        payload = os.urandom(1 << 20)
        env = envelope.seal(params, "2of(role:doctor, dept:cardiology, dept:dermatology)", payload)
        assert envelope.open_envelope(params, keys["cardio"], env) == payload

    def test_same_payload_twice_differs(self, abe_setup):
        params, _ = abe_setup
        assert envelope.seal(params, POLICY, b"x") != envelope.seal(params, POLICY, b"x")

    def test_oversize_payload_rejected(self, abe_setup):
        params, _ = abe_setup

        class FakeBytes(bytes):
            def __len__(self):
                return envelope.MAX_PAYLOAD_BYTES + 1

        with pytest.raises(EnvelopeError):
            envelope.seal(params, POLICY, FakeBytes())

    def test_policy_node_or_string_equivalent_header(self, abe_setup):
        params, _ = abe_setup
        node = policy.parse(POLICY)
        h1 = envelope.parse_header(envelope.seal(params, POLICY, b"x"))
        h2 = envelope.parse_header(envelope.seal(params, node, b"x"))
        assert h1.policy_text == h2.policy_text == policy.render(node)


class TestHeader:
    def test_header_fields(self, abe_setup):
        params, _ = abe_setup
        env = envelope.seal(params, POLICY, b"x", payload_type="fhir-bundle+json")
        h = envelope.parse_header(env)
        assert h.policy_text == POLICY
        assert h.scheme_id == abe.SCHEME_ID
        assert h.payload_type == "fhir-bundle+json"

    def test_magic_and_version(self, abe_setup):
        params, _ = abe_setup
        env = envelope.seal(params, POLICY, b"x")
        assert env[:4] == b"PCE1"

    def test_bad_magic(self, abe_setup):
        params, _ = abe_setup
        env = bytearray(envelope.seal(params, POLICY, b"x"))
        env[:4] = b"NOPE"
        with pytest.raises(IntegrityError):
            envelope.parse_header(bytes(env))

    def test_truncation_detected(self, abe_setup, keys):
        params, _ = abe_setup
        env = envelope.seal(params, POLICY, b"some payload bytes")
        for cut in (0, 3, 10, len(env) // 2, len(env) - 1):
            with pytest.raises(EnvelopeError):
                envelope.open_envelope(params, keys["cardio"], env[:cut])


class TestAccessControl:
    def test_non_satisfying_key_denied(self, abe_setup, keys):
        params, _ = abe_setup
        env = envelope.seal(params, POLICY, b"secret")
        with pytest.raises(AccessDeniedError):
            envelope.open_envelope(params, keys["derma"], env)

    def test_denial_before_any_plaintext(self, abe_setup, keys):
        params, _ = abe_setup
        env = envelope.seal(params, POLICY, b"secret")
        try:
            envelope.open_envelope(params, keys["derma"], env)
        except AccessDeniedError as exc:
            assert b"secret" not in str(exc).encode()


class TestTamper:
    def test_sampled_byte_flips_raise_integrity_error(self, abe_setup, keys):
        params, _ = abe_setup
        env = envelope.seal(params, POLICY, b"v", rng=abe.seeded_rng(5))
        for pos in range(0, len(env), 37):
            tampered = bytearray(env)
            tampered[pos] ^= 0x01
            with pytest.raises(IntegrityError):
                envelope.open_envelope(params, keys["cardio"], bytes(tampered))

    def test_policy_string_tampering_is_integrity_not_denial(self, abe_setup, keys):
        params, _ = abe_setup
        env = envelope.seal(params, POLICY, b"v")
        pos = env.index(b"cardiology")
        tampered = bytearray(env)
        tampered[pos] ^= 0x02
        with pytest.raises(IntegrityError):
            envelope.open_envelope(params, keys["cardio"], bytes(tampered))
