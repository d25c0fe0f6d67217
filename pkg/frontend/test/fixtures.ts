// Cross-implementation fixtures produced by the reference CLI package (the
// other side of the wire formats).  Requires `python3` with the poc-platform
// package installed, which is how the interop CI job runs.

import { execFileSync } from "node:child_process";

export interface InteropFixture {
  params: any;
  cardio: any;
  derma: any;
  envelope: Uint8Array;
  payload: Uint8Array;
}

const FIXTURE_SCRIPT = `
import base64, json
from poc_platform.crypto import abe, envelope

params, msk = abe.setup(abe.seeded_rng(7))
cardio = abe.keygen(msk, ["role:doctor", "dept:cardiology"], abe.seeded_rng(8))
derma = abe.keygen(msk, ["role:doctor", "dept:dermatology"], abe.seeded_rng(9))
payload = json.dumps({
    "resourceType": "Bundle", "type": "collection",
    "entry": [{"resource": {
        "resourceType": "Observation", "status": "final",
        "code": {"text": "Cortisol in sweat"},
        "valueQuantity": {"value": 64.0, "unit": "ng/mL"},
    }}],
}).encode()
env = envelope.seal(params, "role:doctor AND dept:cardiology", payload, rng=abe.seeded_rng(10))
print(json.dumps({
    "params": json.loads(abe.params_to_json(params)),
    "cardio": json.loads(abe.key_to_json(cardio)),
    "derma": json.loads(abe.key_to_json(derma)),
    "envelope": base64.b64encode(env).decode(),
    "payload": base64.b64encode(payload).decode(),
}))
`;

// Opens an envelope (base64 on stdin) with the seed-8 cardiology key and
// prints the recovered payload as base64, or raises.
const OPEN_SCRIPT = `
import base64, sys
from poc_platform.crypto import abe, envelope

params, msk = abe.setup(abe.seeded_rng(7))
cardio = abe.keygen(msk, ["role:doctor", "dept:cardiology"], abe.seeded_rng(8))
data = base64.b64decode(sys.stdin.read())
header = envelope.parse_header(data)
payload = envelope.open_envelope(params, cardio, data)
print(base64.b64encode(payload).decode())
print(header.policy_text)
print(header.payload_type)
`;

export const fromB64 = (s: string): Uint8Array => Uint8Array.from(Buffer.from(s, "base64"));
export const toB64 = (b: Uint8Array): string => Buffer.from(b).toString("base64");

export function loadFixture(): InteropFixture {
  const raw = execFileSync("python3", ["-c", FIXTURE_SCRIPT], { encoding: "utf-8" });
  const doc = JSON.parse(raw);
  return { ...doc, envelope: fromB64(doc.envelope), payload: fromB64(doc.payload) };
}

export function openWithCli(envelopeBytes: Uint8Array): { payload: Uint8Array; policyText: string; payloadType: string } {
  const out = execFileSync("python3", ["-c", OPEN_SCRIPT], {
    input: toB64(envelopeBytes),
    encoding: "utf-8",
  });
  const [payloadB64, policyText, payloadType] = out.trim().split("\n");
  return { payload: fromB64(payloadB64), policyText, payloadType };
}
