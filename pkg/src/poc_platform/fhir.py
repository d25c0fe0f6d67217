"""Constrained FHIR R4 Observation builder, canonical serializer, validator.

Only the Observation resource is supported, with a fixed field subset (single
coding, valueQuantity or component list, opaque subject/device references).
Serialization is canonical: UTF-8 JSON with sorted keys, no insignificant
whitespace, and shortest round-trip number rendering, so identical resources
always produce identical bytes (content addresses and ciphertexts depend on
this).
"""

from __future__ import annotations

import hashlib
import json
from dataclasses import dataclass, field
from datetime import datetime, timezone
from typing import List, Optional, Tuple

from .pipeline import Measurement, MeasurementKind, Quality, VALID_QUALITIES


class FhirError(ValueError):
    pass


# Terminology mapping for measurement kinds.  The codes ship as defaults and
# can be overridden; they are configuration, not asserted ground truth.
CODE_TABLE_VERSION = 1
CODE_TABLE = {
    MeasurementKind.SKIN_TEMPERATURE: {
        "system": "http://loinc.org",
        "code": "8310-5",
        "display": "Body temperature",
        "unit": "Cel",
        "ucum": "Cel",
    },
    MeasurementKind.SWEAT_PH: {
        "system": "http://loinc.org",
        "code": "11558-4",
        "display": "pH of Body fluid",
        "unit": "pH",
        "ucum": "[pH]",
    },
    MeasurementKind.SWEAT_CORTISOL: {
        "system": "http://loinc.org",
        "code": "2143-6",
        "display": "Cortisol [Mass/volume] in Body fluid",
        "unit": "ng/mL",
        "ucum": "ng/mL",
    },
}

UCUM_SYSTEM = "http://unitsofmeasure.org"

ALLOWED_STATUS = ("final", "preliminary")


@dataclass(frozen=True)
class Quantity:
    value: float
    unit: str
    system: str = UCUM_SYSTEM
    code: str = ""


@dataclass(frozen=True)
class Component:
    system: str
    code: str
    display: str
    quantity: Quantity


@dataclass(frozen=True)
class FhirObservation:
    id: str
    status: str
    code_system: str
    code: str
    display: str
    subject: str
    effective_datetime: str
    value: Optional[Quantity] = None
    components: Tuple[Component, ...] = ()
    device: Optional[str] = None

    def __post_init__(self):
        if self.status not in ALLOWED_STATUS:
            raise FhirError(f"status {self.status!r} not in {ALLOWED_STATUS}")
        if (self.value is None) == (len(self.components) == 0):
            raise FhirError("exactly one of valueQuantity / component must be present")
        _parse_iso8601(self.effective_datetime)


def _parse_iso8601(text: str) -> datetime:
    try:
        return datetime.fromisoformat(text.replace("Z", "+00:00"))
    except (ValueError, TypeError, AttributeError):
        raise FhirError(f"effectiveDateTime {text!r} is not ISO-8601") from None


def observation_id(subject: str, kind: str, timestamp: str) -> str:
    digest = hashlib.sha256(f"{subject}|{kind}|{timestamp}".encode()).hexdigest()
    return f"obs-{digest[:16]}"


def build_observation(
    m: Measurement,
    subject: str,
    device: Optional[str] = None,
    session_start: Optional[datetime] = None,
    status: str = "final",
) -> FhirObservation:
    """Observation for one measurement; rejects discarded/insufficient input."""
    if m.quality not in VALID_QUALITIES:
        raise FhirError(f"measurement with quality {m.quality.value!r} cannot become an Observation")
    entry = CODE_TABLE[m.kind]
    if session_start is None:
        session_start = datetime(1970, 1, 1, tzinfo=timezone.utc)
    effective = datetime.fromtimestamp(
        session_start.timestamp() + m.timestamp_s, tz=timezone.utc
    ).isoformat().replace("+00:00", "Z")
    # Z suffix keeps fromisoformat (3.11+) and FHIR consumers happy.
    effective_for_id = effective
    return FhirObservation(
        id=observation_id(subject, m.kind.value, effective_for_id),
        status=status,
        code_system=entry["system"],
        code=entry["code"],
        display=entry["display"],
        subject=subject,
        effective_datetime=effective,
        value=Quantity(value=m.value, unit=entry["unit"], system=UCUM_SYSTEM, code=entry["ucum"]),
        device=device,
    )


# ---------------------------------------------------------------------------
# Canonical serialization

def to_dict(obs: FhirObservation) -> dict:
    out = {
        "resourceType": "Observation",
        "id": obs.id,
        "status": obs.status,
        "code": {"coding": [{"system": obs.code_system, "code": obs.code, "display": obs.display}]},
        "subject": {"reference": obs.subject},
        "effectiveDateTime": obs.effective_datetime,
    }
    if obs.value is not None:
        out["valueQuantity"] = {
            "value": obs.value.value,
            "unit": obs.value.unit,
            "system": obs.value.system,
            "code": obs.value.code,
        }
    if obs.components:
        out["component"] = [
            {
                "code": {"coding": [{"system": c.system, "code": c.code, "display": c.display}]},
                "valueQuantity": {
                    "value": c.quantity.value,
                    "unit": c.quantity.unit,
                    "system": c.quantity.system,
                    "code": c.quantity.code,
                },
            }
            for c in obs.components
        ]
    if obs.device is not None:
        out["device"] = {"reference": obs.device}
    return out


def serialize(obs: FhirObservation) -> bytes:
    """Canonical bytes: sorted keys, compact separators, repr-rendered floats."""
    return json.dumps(to_dict(obs), sort_keys=True, separators=(",", ":"), ensure_ascii=True).encode()


def _quantity_from_dict(d: dict, path: str) -> Quantity:
    try:
        return Quantity(value=d["value"], unit=d["unit"], system=d.get("system", UCUM_SYSTEM), code=d.get("code", ""))
    except KeyError as e:
        raise FhirError(f"{path} is missing {e.args[0]!r}") from None


def parse(data: bytes) -> FhirObservation:
    """Strict parse of serialized Observation bytes (known fields only)."""
    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        raise FhirError(f"not valid JSON: {e}") from None
    if not isinstance(doc, dict) or doc.get("resourceType") != "Observation":
        raise FhirError("not an Observation resource")
    try:
        coding = doc["code"]["coding"][0]
        components = tuple(
            Component(
                system=c["code"]["coding"][0]["system"],
                code=c["code"]["coding"][0]["code"],
                display=c["code"]["coding"][0].get("display", ""),
                quantity=_quantity_from_dict(c["valueQuantity"], "component.valueQuantity"),
            )
            for c in doc.get("component", [])
        )
        return FhirObservation(
            id=doc["id"],
            status=doc["status"],
            code_system=coding["system"],
            code=coding["code"],
            display=coding.get("display", ""),
            subject=doc["subject"]["reference"],
            effective_datetime=doc["effectiveDateTime"],
            value=_quantity_from_dict(doc["valueQuantity"], "valueQuantity") if "valueQuantity" in doc else None,
            components=components,
            device=doc["device"]["reference"] if "device" in doc else None,
        )
    except (KeyError, IndexError, TypeError) as e:
        raise FhirError(f"malformed Observation: {e!r}") from None


# ---------------------------------------------------------------------------
# Validation

@dataclass(frozen=True)
class Issue:
    path: str
    severity: str  # "error" | "warning"
    message: str


@dataclass
class ValidationReport:
    issues: List[Issue] = field(default_factory=list)

    @property
    def valid(self) -> bool:
        return not any(i.severity == "error" for i in self.issues)

    def errors(self) -> List[Issue]:
        return [i for i in self.issues if i.severity == "error"]


_KNOWN_TOP = {
    "resourceType", "id", "status", "code", "subject", "effectiveDateTime",
    "valueQuantity", "component", "device",
}


def validate(data: bytes) -> ValidationReport:
    """Structural validation; malformed input yields a report, never a crash.

    Unknown fields are warnings (forward compatibility), structural breaks are
    errors.
    """
    report = ValidationReport()

    def err(path, msg):
        report.issues.append(Issue(path=path, severity="error", message=msg))

    def warn(path, msg):
        report.issues.append(Issue(path=path, severity="warning", message=msg))

    try:
        doc = json.loads(data.decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as e:
        err("", f"not valid JSON: {e}")
        return report
    if not isinstance(doc, dict):
        err("", "document is not a JSON object")
        return report

    if doc.get("resourceType") != "Observation":
        err("resourceType", f"expected 'Observation', got {doc.get('resourceType')!r}")
    for key in doc:
        if key not in _KNOWN_TOP:
            warn(key, "unknown field (ignored)")

    for required in ("id", "status", "code", "subject", "effectiveDateTime"):
        if required not in doc:
            err(required, "missing required field")

    if "status" in doc and doc["status"] not in ALLOWED_STATUS:
        err("status", f"status {doc['status']!r} not in {ALLOWED_STATUS}")

    if "effectiveDateTime" in doc:
        try:
            _parse_iso8601(doc["effectiveDateTime"])
        except FhirError:
            err("effectiveDateTime", f"{doc['effectiveDateTime']!r} is not ISO-8601")

    if "code" in doc:
        coding = doc.get("code", {}).get("coding") if isinstance(doc.get("code"), dict) else None
        if not isinstance(coding, list) or not coding:
            err("code.coding", "must be a non-empty list")
        else:
            for i, c in enumerate(coding):
                if not isinstance(c, dict) or "system" not in c or "code" not in c:
                    err(f"code.coding[{i}]", "needs 'system' and 'code'")

    if "subject" in doc and not (isinstance(doc["subject"], dict) and isinstance(doc["subject"].get("reference"), str)):
        err("subject", "must be an object with a string 'reference'")

    has_value = "valueQuantity" in doc
    has_component = bool(doc.get("component"))
    if has_value == has_component:
        err("valueQuantity", "exactly one of valueQuantity / component must be present")

    def check_quantity(q, path):
        if not isinstance(q, dict):
            err(path, "must be an object")
            return
        if not isinstance(q.get("value"), (int, float)) or isinstance(q.get("value"), bool):
            err(f"{path}.value", "must be a number")
        if not isinstance(q.get("unit"), str):
            err(f"{path}.unit", "must be a string")

    if has_value:
        check_quantity(doc["valueQuantity"], "valueQuantity")
    if has_component:
        if not isinstance(doc["component"], list):
            err("component", "must be a list")
        else:
            for i, comp in enumerate(doc["component"]):
                if not isinstance(comp, dict) or "valueQuantity" not in comp or "code" not in comp:
                    err(f"component[{i}]", "needs 'code' and 'valueQuantity'")
                else:
                    check_quantity(comp["valueQuantity"], f"component[{i}].valueQuantity")
    return report
