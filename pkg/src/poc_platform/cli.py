"""Role-oriented command line for the point-of-care loop.

Patient side: run a simulated sensing session, review the immediate feedback,
publish the resulting clinical observations encrypted under an attribute
policy.  Doctor side: list share notices, fetch an envelope, decrypt it with
the locally cached attribute key and render the observations.

Exit codes:
    0  success
    2  configuration / usage error (missing files, bad policy, bad input)
    3  hub unreachable (after one retry)
    4  authentication failure or not logged in
    5  policy not satisfied by the cached key
    6  envelope integrity failure
    1  any other module error
"""

from __future__ import annotations

import json
import os
import stat
import sys
from datetime import datetime, timezone
from pathlib import Path
from typing import List, Optional

import click

from . import fhir, pipeline, policy, reader_sim
from .crypto import abe, envelope
from .hub.client import HubClient, HubError, HubUnreachableError

EXIT_CONFIG = 2
EXIT_NETWORK = 3
EXIT_AUTH = 4
EXIT_DENIED = 5
EXIT_INTEGRITY = 6

DEFAULT_HUB = "http://127.0.0.1:8000"
DATA_DIR = Path(__file__).parent / "data"

SESSION_FILE = "session.json"
KEY_FILE = "abe_key.json"


class CliState:
    def __init__(self, hub_url: str, home: Path):
        self.hub_url = hub_url
        self.home = home

    def _path(self, name: str) -> Path:
        return self.home / name

    def save_session(self, data: dict):
        self.home.mkdir(parents=True, exist_ok=True)
        self._write_private(self._path(SESSION_FILE), json.dumps(data).encode())

    def load_session(self) -> Optional[dict]:
        try:
            return json.loads(self._path(SESSION_FILE).read_text())
        except (OSError, ValueError):
            return None

    def save_key(self, key_json: str):
        self.home.mkdir(parents=True, exist_ok=True)
        self._write_private(self._path(KEY_FILE), key_json.encode())

    def load_key(self) -> Optional[abe.UserSecretKey]:
        try:
            return abe.key_from_json(self._path(KEY_FILE).read_text())
        except (OSError, ValueError, KeyError):
            return None

    @staticmethod
    def _write_private(path: Path, data: bytes):
        path.write_bytes(data)
        os.chmod(path, stat.S_IRUSR | stat.S_IWUSR)

    def wipe(self):
        for name in (SESSION_FILE, KEY_FILE):
            try:
                self._path(name).unlink()
            except FileNotFoundError:
                pass

    def client(self) -> HubClient:
        c = HubClient(self.hub_url)
        session = self.load_session()
        if session:
            c.token = session.get("token")
        return c


pass_state = click.make_pass_decorator(CliState)


def _fail(code: int, message: str):
    click.echo(f"error: {message}", err=True)
    sys.exit(code)


def _hub_guard(fn):
    """Translate hub/crypto errors into the documented exit codes."""
    import functools

    @functools.wraps(fn)
    def wrapper(*args, **kwargs):
        try:
            return fn(*args, **kwargs)
        except HubUnreachableError as exc:
            _fail(EXIT_NETWORK, str(exc))
        except HubError as exc:
            _fail(EXIT_AUTH if exc.code == "auth_failed" else EXIT_CONFIG, str(exc))
        except envelope.AccessDeniedError:
            _fail(EXIT_DENIED, "policy not satisfied: this key cannot decrypt the document")
        except envelope.IntegrityError as exc:
            _fail(EXIT_INTEGRITY, f"integrity failure: {exc}")
        except policy.PolicyError as exc:
            _fail(EXIT_CONFIG, f"policy: {exc}")
        except (pipeline.PipelineError, reader_sim.ScenarioError, fhir.FhirError) as exc:
            _fail(1, f"{type(exc).__name__}: {exc}")

    return wrapper


@click.group()
@click.option("--hub", "hub_url", envvar="POC_HUB_URL", default=DEFAULT_HUB, show_default=True,
              help="Hub base URL (env: POC_HUB_URL).")
@click.option("--home", envvar="POC_HOME", default=os.path.expanduser("~/.poc-platform"),
              show_default=True, help="Directory for tokens, cached keys and outputs (env: POC_HOME).")
@click.pass_context
def main(ctx, hub_url, home):
    """Point-of-care sensing, encryption and sharing workflows."""
    ctx.obj = CliState(hub_url, Path(home))


@main.command()
@click.argument("user_id")
@click.option("--credential", prompt=True, hide_input=True)
@pass_state
@_hub_guard
def login(state: CliState, user_id, credential):
    """Authenticate against the hub; doctors also receive their attribute key."""
    with state.client() as c:
        body = c.login(user_id, credential)
        state.save_session({"user_id": user_id, "token": body["token"], "role": body["role"]})
        if body["role"] == "staff":
            usk = c.issue_key(user_id, credential)
            state.save_key(abe.key_to_json(usk))
            click.echo(f"logged in as {user_id} (staff); attribute key cached "
                       f"[{', '.join(sorted(str(a) for a in usk.attributes))}]")
        else:
            click.echo(f"logged in as {user_id} ({body['role']})")


@main.command()
@pass_state
def logout(state: CliState):
    """Forget the session token and wipe the cached attribute key."""
    state.wipe()
    click.echo("logged out; local key material wiped")


@main.group()
def patient():
    """Patient-side workflows."""


@main.group()
def doctor():
    """Doctor-side workflows."""


def _severity_tag(alert: pipeline.Alert) -> str:
    return alert.severity.value.upper()


@patient.command("run-session")
@click.option("--scenario", "scenario_path", default=str(DATA_DIR / "bike_walk.scenario"),
              show_default=True)
@click.option("--calibration", "calibration_path", default=str(DATA_DIR / "default.calibration"),
              show_default=True)
@click.option("--out", "out_dir", default=None, help="Observation output directory [default: HOME/observations].")
@click.option("--subject", default="patient", show_default=True, help="Subject id recorded in observations.")
@click.option("--session-id", default=None, help="Session label [default: scenario id].")
@pass_state
@_hub_guard
def run_session(state: CliState, scenario_path, calibration_path, out_dir, subject, session_id):
    """Simulate a session, print feedback, write observation documents."""
    for p in (scenario_path, calibration_path):
        if not os.path.exists(p):
            _fail(EXIT_CONFIG, f"file not found: {p}")
    try:
        scenario = reader_sim.load_scenario(scenario_path)
        cal, cleaning = pipeline.load_calibration(calibration_path)
    except (reader_sim.ScenarioError, pipeline.CalibrationError, ValueError) as exc:
        _fail(EXIT_CONFIG, str(exc))
    session_id = session_id or scenario.scenario_id
    readings = reader_sim.generate_readings(scenario)
    result = pipeline.process_session(readings, cal, cleaning, session_id=session_id)

    click.echo(f"session {session_id}: {len(readings)} readings, "
               f"{sum(result.discarded.values())} discarded")
    session_start = datetime.now(timezone.utc)
    out = Path(out_dir) if out_dir else state.home / "observations"
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for kind in pipeline.MeasurementKind:
        m = result.latest(kind)
        if m is None:
            click.echo(f"  {kind.value}: no valid measurement")
            continue
        click.echo(f"  {kind.value}: {m.value:.2f} {m.unit} (t={m.timestamp_s:.0f}s)")
        obs = fhir.build_observation(m, subject=subject, device=f"scenario:{scenario.scenario_id}",
                                     session_start=session_start)
        path = out / f"{obs.id}.json"
        path.write_bytes(fhir.serialize(obs))
        written.append(path)
    temps = result.series(pipeline.MeasurementKind.SKIN_TEMPERATURE)
    if temps:
        click.echo(f"  temperature rise: {temps[-1].value - temps[0].value:+.2f} °C")
    if result.plateau and result.plateau.converged:
        click.echo(f"  amperometric plateau: {result.plateau.plateau_current_uA:.3f} uA "
                   f"at t={result.plateau.t_stab_s:.0f}s after tap")
    for alert in result.report.alerts:
        click.echo(f"  [{_severity_tag(alert)}] {alert.message}")
    click.echo(f"completed: {'yes' if result.report.completed else 'no'}")
    click.echo(f"wrote {len(written)} observation file(s) to {out}")
    if not result.report.completed:
        sys.exit(1)


@patient.command()
@click.argument("observation_files", nargs=-1, type=click.Path(exists=True))
@click.option("--policy", "policy_text", required=True, help="Access policy, e.g. 'role:doctor AND dept:cardiology'.")
@click.option("--payload-type", default="fhir-bundle+json", show_default=True)
@pass_state
@_hub_guard
def publish(state: CliState, observation_files, policy_text, payload_type):
    """Encrypt observations under POLICY, upload, and notify the audience."""
    if not observation_files:
        _fail(EXIT_CONFIG, "no observation files given")
    node = policy.parse(policy_text)  # fail before touching the network
    docs = []
    for path in observation_files:
        data = Path(path).read_bytes()
        report = fhir.validate(data)
        if not report.valid:
            _fail(EXIT_CONFIG, f"{path} is not a valid observation: {report.errors()[0].message}")
        docs.append(json.loads(data.decode()))
    bundle = json.dumps({"resourceType": "Bundle", "type": "collection",
                         "entry": [{"resource": d} for d in docs]},
                        sort_keys=True, separators=(",", ":")).encode()
    with state.client() as c:
        if not c.token:
            _fail(EXIT_AUTH, "not logged in")
        params = c.get_params()
        env = envelope.seal(params, node, bundle, payload_type=payload_type)
        doc_id = c.upload(env)
        res = c.share(doc_id, policy.render(node))
    click.echo(f"doc {doc_id}")
    if res["notices"]:
        for n in res["notices"]:
            click.echo(f"notified {n['to']} (notice {n['notice_id']})")
    else:
        click.echo("warning: audience matched no registered recipients")


@doctor.command()
@click.option("--since", type=float, default=None, help="Only notices created after this timestamp.")
@click.option("--wait", "wait_s", type=float, default=0.0, help="Long-poll up to N seconds for new notices.")
@pass_state
@_hub_guard
def inbox(state: CliState, since, wait_s):
    """List share notices addressed to the logged-in user."""
    with state.client() as c:
        if not c.token:
            _fail(EXIT_AUTH, "not logged in")
        notices = c.notices(since=since, wait_s=wait_s)
    if not notices:
        click.echo("no notices")
        return
    for n in notices:
        click.echo(f"{n['notice_id']}  {n['created_at']:.3f}  from {n['from']}  doc {n['doc_id']}")


def _code_label(code: dict) -> str:
    if code.get("text"):
        return code["text"]
    for coding in code.get("coding", []):
        if coding.get("display"):
            return coding["display"]
    return "?"


def _render_observation(d: dict) -> List[tuple]:
    rows = []
    label = _code_label(d.get("code", {}))
    t = d.get("effectiveDateTime", "?")
    q = d.get("valueQuantity")
    if q:
        rows.append((label, f"{q.get('value'):.4g}", q.get("unit", ""), t))
    for comp in d.get("component", []):
        cq = comp.get("valueQuantity", {})
        rows.append((_code_label(comp.get("code", {})), f"{cq.get('value'):.4g}", cq.get("unit", ""), t))
    return rows


@doctor.command("fetch-view")
@click.argument("doc_id")
@pass_state
@_hub_guard
def fetch_view(state: CliState, doc_id):
    """Fetch DOC_ID, decrypt with the cached key, and show the values."""
    usk = state.load_key()
    if usk is None:
        _fail(EXIT_AUTH, "no cached attribute key; run `poc login` as a staff user first")
    with state.client() as c:
        if not c.token:
            _fail(EXIT_AUTH, "not logged in")
        params = c.get_params()
        data = c.fetch(doc_id)
    header = envelope.parse_header(data)
    plaintext = envelope.open_envelope(params, usk, data)
    click.echo(f"doc {doc_id}")
    click.echo(f"policy: {header.policy_text}")
    try:
        body = json.loads(plaintext.decode())
    except ValueError:
        _fail(1, "decrypted payload is not JSON")
    resources = [e["resource"] for e in body.get("entry", [])] if body.get("resourceType") == "Bundle" else [body]
    rows = []
    for res in resources:
        rows.extend(_render_observation(res))
    width = max((len(r[0]) for r in rows), default=10)
    for name, value, unit, t in rows:
        click.echo(f"  {name:<{width}}  {value:>10} {unit:<6} {t}")


if __name__ == "__main__":
    main()
