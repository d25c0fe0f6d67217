// Thin fetch-based client for the sharing hub's wire API.

import * as abe from "./abe.js";

export class HubError extends Error {
  constructor(
    readonly code: string,
    message: string,
    readonly status = 0,
  ) {
    super(`${code}: ${message}`);
  }
}

export interface ShareNotice {
  notice_id: string;
  doc_id: string;
  from: string;
  to: string;
  audience: string;
  created_at: number;
  read: boolean;
}

export class HubClient {
  token: string | null = null;

  constructor(readonly baseUrl: string) {}

  private async request(method: string, path: string, opts: RequestInit = {}, authed = false): Promise<Response> {
    const headers = new Headers(opts.headers);
    if (authed) {
      if (!this.token) throw new HubError("auth_failed", "not logged in");
      headers.set("Authorization", `Bearer ${this.token}`);
    }
    let resp: Response;
    try {
      resp = await fetch(this.baseUrl + path, { ...opts, method, headers });
    } catch {
      // one retry, mirroring the CLI's network contract
      try {
        resp = await fetch(this.baseUrl + path, { ...opts, method, headers });
      } catch (e) {
        throw new HubError("network_error", `hub unreachable after retry: ${e}`);
      }
    }
    if (!resp.ok) {
      let code = "http_error";
      let message = `status ${resp.status}`;
      try {
        const body = await resp.json();
        if (body.code) {
          code = body.code;
          message = body.message;
        }
      } catch {
        /* non-JSON error body */
      }
      throw new HubError(code, message, resp.status);
    }
    return resp;
  }

  private async postJson(path: string, body: unknown, authed = false): Promise<any> {
    const resp = await this.request(
      "POST",
      path,
      { body: JSON.stringify(body), headers: { "content-type": "application/json" } },
      authed,
    );
    return resp.json();
  }

  async registerUser(userId: string, role: string, attributes: string[], credential: string): Promise<any> {
    return this.postJson("/users", { user_id: userId, role, attributes, credential });
  }

  async login(userId: string, credential: string): Promise<{ token: string; role: string; attributes: string[] }> {
    const body = await this.postJson("/login", { user_id: userId, credential });
    this.token = body.token;
    return body;
  }

  async issueKey(userId: string, credential: string): Promise<abe.UserSecretKey> {
    return abe.keyFromJson(await this.postJson("/keys", { user_id: userId, credential }));
  }

  async getParamsDoc(): Promise<any> {
    return (await this.request("GET", "/params")).json();
  }

  async getParams(): Promise<abe.PublicParams> {
    return abe.paramsFromJson(await this.getParamsDoc());
  }

  async attributeUniverse(): Promise<string[]> {
    return (await this.getParamsDoc()).attribute_universe;
  }

  async upload(envelopeBytes: Uint8Array): Promise<string> {
    const resp = await this.request(
      "POST",
      "/docs",
      { body: envelopeBytes as BodyInit, headers: { "content-type": "application/octet-stream" } },
      true,
    );
    return (await resp.json()).doc_id;
  }

  async fetchDoc(docId: string): Promise<Uint8Array> {
    const resp = await this.request("GET", `/docs/${docId}`, {}, true);
    return new Uint8Array(await resp.arrayBuffer());
  }

  async share(docId: string, audience: string): Promise<{ notices: ShareNotice[]; warning?: string }> {
    return this.postJson("/shares", { doc_id: docId, audience }, true);
  }

  async notices(since?: number, waitS = 0): Promise<ShareNotice[]> {
    const params = new URLSearchParams();
    if (since !== undefined) params.set("since", String(since));
    if (waitS) params.set("wait_s", String(waitS));
    const qs = params.size ? `?${params}` : "";
    const resp = await this.request("GET", `/notices${qs}`, {}, true);
    return (await resp.json()).notices;
  }
}
