// Single-page client: login, attribute-based sharing menu, and an inbox that
// fetches, decrypts (in the browser — the hub only ever sees envelopes), and
// renders shared observation documents.

import * as abe from "./abe.js";
import * as envelope from "./envelope.js";
import { HubClient, ShareNotice } from "./hub.js";
import * as policyMod from "./policy.js";

interface SessionState {
  userId: string;
  role: string;
  attributes: string[];
  params: abe.PublicParams;
  universe: string[];
  key: abe.UserSecretKey | null; // staff only; memory only, wiped on logout
  noticeCursor: number | null;
}

let hub: HubClient;
let session: SessionState | null = null;

const $ = <T extends HTMLElement>(id: string): T => {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
};

function show(viewId: "view-login" | "view-main") {
  for (const id of ["view-login", "view-main"] as const) {
    $(id).hidden = id !== viewId;
  }
}

function setStatus(text: string, isError = false) {
  const el = $("status");
  el.textContent = text;
  el.className = isError ? "status error" : "status";
}

// ---------------------------------------------------------------------------
// Login / logout

async function doLogin(userId: string, credential: string) {
  const client = new HubClient($<HTMLInputElement>("hub-url").value);
  const body = await client.login(userId, credential);
  const params = await client.getParams();
  const universe = await client.attributeUniverse();
  let key: abe.UserSecretKey | null = null;
  if (body.role === "staff") {
    key = await client.issueKey(userId, credential);
  }
  hub = client;
  session = {
    userId,
    role: body.role,
    attributes: body.attributes,
    params,
    universe,
    key,
    noticeCursor: null,
  };
  $("whoami").textContent =
    key === null
      ? `${userId} (${body.role})`
      : `${userId} (${body.role}; key attributes: ${key.attributes.join(", ")})`;
  renderAttributeCheckboxes();
  show("view-main");
  await refreshInbox();
}

function doLogout() {
  session = null; // drops token and key material
  show("view-login");
  setStatus("logged out; key material wiped");
}

// ---------------------------------------------------------------------------
// Sharing menu: checkbox attribute selection with a live policy preview, plus
// an advanced free-text mode validated by the same grammar.

function renderAttributeCheckboxes() {
  const box = $("attr-boxes");
  box.innerHTML = "";
  for (const attr of session!.universe) {
    const label = document.createElement("label");
    const cb = document.createElement("input");
    cb.type = "checkbox";
    cb.value = attr;
    cb.addEventListener("change", updatePolicyPreview);
    label.append(cb, ` ${attr}`);
    box.append(label);
  }
  updatePolicyPreview();
}

function draftPolicyText(): string {
  if ($<HTMLInputElement>("advanced-toggle").checked) {
    return $<HTMLTextAreaElement>("policy-free").value;
  }
  const checked = Array.from($("attr-boxes").querySelectorAll<HTMLInputElement>("input:checked"));
  return checked.map((cb) => cb.value).join(" AND ");
}

function updatePolicyPreview() {
  const text = draftPolicyText();
  const preview = $("policy-preview");
  const submit = $<HTMLButtonElement>("share-submit");
  if (!text.trim()) {
    preview.textContent = "(no attributes selected)";
    submit.disabled = true;
    return;
  }
  try {
    preview.textContent = policyMod.render(policyMod.parse(text));
    submit.disabled = false;
  } catch (e) {
    preview.textContent = `invalid policy: ${(e as Error).message}`;
    submit.disabled = true;
  }
}

async function doShare() {
  const fileInput = $<HTMLInputElement>("share-files");
  const files = fileInput.files;
  if (!files || files.length === 0) {
    setStatus("select at least one document", true);
    return;
  }
  const node = policyMod.parse(draftPolicyText());
  const audience = policyMod.render(node);
  const entries = [];
  for (const file of files) {
    entries.push({ resource: JSON.parse(await file.text()) });
  }
  const bundle = { resourceType: "Bundle", type: "collection", entry: entries };
  const payload = new TextEncoder().encode(JSON.stringify(bundle));
  // encryption happens entirely client-side; the hub stores only the envelope
  const sealed = await envelope.seal(session!.params, node, payload);
  const docId = await hub.upload(sealed);
  const result = await hub.share(docId, audience);
  if (result.warning) {
    setStatus(`uploaded ${docId.slice(0, 12)}…, but ${result.warning}`, true);
  } else {
    setStatus(`shared ${docId.slice(0, 12)}… with ${result.notices.length} recipient(s) under "${audience}"`);
  }
}

// ---------------------------------------------------------------------------
// Inbox: newest-first list, decrypt on click.

async function refreshInbox() {
  const notices = await hub.notices(session!.noticeCursor ?? undefined);
  if (notices.length) {
    session!.noticeCursor = Math.max(...notices.map((n) => n.created_at));
  }
  const list = $("inbox-list");
  for (const n of notices) {
    list.prepend(noticeRow(n));
  }
  $("inbox-empty").hidden = list.children.length > 0;
}

function noticeRow(n: ShareNotice): HTMLElement {
  const row = document.createElement("li");
  const button = document.createElement("button");
  button.textContent = `${n.doc_id.slice(0, 12)}… from ${n.from}`;
  const badge = document.createElement("span");
  const detail = document.createElement("div");
  button.addEventListener("click", async () => {
    badge.textContent = "";
    detail.innerHTML = "";
    try {
      const data = await hub.fetchDoc(n.doc_id);
      if (!session!.key) throw new envelope.AccessDeniedError("no decryption key for this account");
      const payload = await envelope.openEnvelope(session!.params, session!.key, data);
      detail.append(renderBundle(JSON.parse(new TextDecoder().decode(payload))));
      badge.textContent = "decrypted";
      badge.className = "badge ok";
    } catch (e) {
      if (e instanceof envelope.AccessDeniedError) {
        badge.textContent = "no access";
        badge.className = "badge denied";
      } else if (e instanceof envelope.IntegrityError) {
        badge.textContent = `integrity failure: ${(e as Error).message}`;
        badge.className = "badge integrity";
      } else {
        badge.textContent = `error: ${(e as Error).message}`;
        badge.className = "badge error";
      }
    }
  });
  row.append(button, badge, detail);
  return row;
}

function renderBundle(bundle: any): HTMLElement {
  const table = document.createElement("table");
  table.innerHTML = "<tr><th>measurement</th><th>value</th><th>unit</th><th>time</th></tr>";
  const resources = bundle.resourceType === "Bundle" ? bundle.entry.map((e: any) => e.resource) : [bundle];
  for (const obs of resources) {
    const label = obs.code?.text ?? obs.code?.coding?.[0]?.display ?? obs.code?.coding?.[0]?.code ?? "?";
    const quantities = obs.valueQuantity
      ? [{ label, q: obs.valueQuantity }]
      : (obs.component ?? []).map((c: any) => ({
          label: c.code?.text ?? c.code?.coding?.[0]?.display ?? "?",
          q: c.valueQuantity,
        }));
    for (const { label: rowLabel, q } of quantities) {
      const tr = document.createElement("tr");
      tr.innerHTML = `<td>${rowLabel}</td><td>${q?.value ?? "?"}</td><td>${q?.unit ?? ""}</td><td>${obs.effectiveDateTime ?? ""}</td>`;
      table.append(tr);
    }
  }
  return table;
}

// ---------------------------------------------------------------------------

export function init() {
  $("login-form").addEventListener("submit", async (e) => {
    e.preventDefault();
    try {
      await doLogin($<HTMLInputElement>("login-user").value, $<HTMLInputElement>("login-credential").value);
      setStatus("");
    } catch (err) {
      setStatus(`login failed: ${(err as Error).message}`, true);
    }
  });
  $("logout").addEventListener("click", doLogout);
  $("advanced-toggle").addEventListener("change", updatePolicyPreview);
  $("policy-free").addEventListener("input", updatePolicyPreview);
  $("share-submit").addEventListener("click", () =>
    doShare().catch((e) => setStatus(`share failed: ${(e as Error).message}`, true)),
  );
  $("inbox-refresh").addEventListener("click", () =>
    refreshInbox().catch((e) => setStatus(`inbox failed: ${(e as Error).message}`, true)),
  );
  show("view-login");
}

if (typeof document !== "undefined" && document.getElementById("view-login")) {
  init();
}
