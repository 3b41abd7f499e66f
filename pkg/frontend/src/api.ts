/** Typed client for the gateway's JSON API. */

export const TOKEN_HEADER = "X-Gridgate-Token";

export class ApiError extends Error {
  constructor(
    public readonly status: number,
    public readonly error: string,
    public readonly detail: string,
  ) {
    super(detail ? `${error}: ${detail}` : error);
  }
}

export interface JobSummary {
  id: string;
  status: string;
  submitted_at: string;
  collection_id: string | null;
}

export interface HistoryEntry {
  status: string;
  at: string;
}

export interface JobDetail extends JobSummary {
  history: HistoryEntry[];
  exit_code: number | null;
  warnings: string[];
  proxy_expiry: string | null;
  historical: boolean;
}

export interface SubmitResult {
  job_ids: string[];
  collection_id: string | null;
  warnings: string[];
}

export interface ValidationIssue {
  severity: string;
  code: string;
  message: string;
  line: number | null;
  column: number | null;
}

export interface ValidationResult {
  valid: boolean;
  issues: ValidationIssue[];
}

export interface SubmitRequest {
  jdl: string;
  vo: string;
  /** Pre-packed gzipped tar of the input files, if any. */
  sandbox?: Uint8Array;
  myproxyUsername?: string;
  myproxyPassword?: string;
}

export type FetchLike = typeof fetch;

/** Raw reply of one delegation protocol hop. */
export interface DelegationReply {
  body: Uint8Array;
  token: string | null;
}

export class GatewayApi {
  token: string | null = null;

  private readonly fetchImpl: FetchLike;

  constructor(
    public readonly baseUrl: string = "",
    options: { fetchImpl?: FetchLike } = {},
  ) {
    this.fetchImpl = options.fetchImpl ?? fetch.bind(globalThis);
  }

  private async request(
    method: string,
    path: string,
    options: { body?: BodyInit; headers?: Record<string, string>; auth?: boolean } = {},
  ): Promise<Response> {
    const headers: Record<string, string> = { ...options.headers };
    if (options.auth !== false && this.token) {
      headers["Authorization"] = `Bearer ${this.token}`;
    }
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method,
      headers,
      body: options.body ?? null,
    });
    if (!response.ok) {
      let error = `HTTP ${response.status}`;
      let detail = "";
      try {
        const doc = await response.json();
        error = doc.error ?? error;
        detail = doc.detail ?? "";
      } catch {
        // non-JSON error body; keep the status text
      }
      throw new ApiError(response.status, error, detail);
    }
    return response;
  }

  /** One hop of the delegation exchange; the reply body is passed through
   *  untouched so the protocol layer can parse it. Protocol-level refusals
   *  arrive as ack messages on error statuses, so those are not failures
   *  at this layer. */
  async delegationExchange(path: string, message: Uint8Array): Promise<DelegationReply> {
    const response = await this.fetchImpl(`${this.baseUrl}${path}`, {
      method: "POST",
      headers: { "content-type": "application/json" },
      body: message.slice().buffer as ArrayBuffer,
    });
    if (![200, 404, 409, 422].includes(response.status)) {
      throw new ApiError(response.status, `HTTP ${response.status}`, await response.text());
    }
    const token = response.headers.get(TOKEN_HEADER);
    if (token) {
      this.token = token;
    }
    return { body: new Uint8Array(await response.arrayBuffer()), token };
  }

  async submit(request: SubmitRequest): Promise<SubmitResult> {
    const form = new FormData();
    form.append("jdl", request.jdl);
    form.append("vo", request.vo);
    if (request.myproxyUsername) {
      form.append("myproxy_username", request.myproxyUsername);
    }
    if (request.myproxyPassword) {
      form.append("myproxy_password", request.myproxyPassword);
    }
    if (request.sandbox) {
      form.append(
        "sandbox",
        new Blob([request.sandbox.slice().buffer as ArrayBuffer], { type: "application/gzip" }),
        "sandbox.tar.gz",
      );
    }
    const response = await this.request("POST", "/jobs", { body: form });
    return await response.json();
  }

  async jobs(): Promise<JobSummary[]> {
    const response = await this.request("GET", "/jobs");
    const doc = await response.json();
    return doc.jobs;
  }

  async job(id: string): Promise<JobDetail> {
    const response = await this.request("GET", `/jobs/${id}`);
    return await response.json();
  }

  async output(id: string): Promise<Uint8Array> {
    const response = await this.request("GET", `/jobs/${id}/output`);
    return new Uint8Array(await response.arrayBuffer());
  }

  async cancel(id: string): Promise<{ id: string; status: string }> {
    const response = await this.request("DELETE", `/jobs/${id}`);
    return await response.json();
  }

  async renew(id: string): Promise<{ id: string; expiry: string }> {
    const response = await this.request("POST", `/jobs/${id}/renew`);
    return await response.json();
  }

  async validateJdl(text: string): Promise<ValidationResult> {
    const response = await this.request("POST", "/jdl/validate", {
      body: text,
      headers: { "content-type": "text/plain" },
      auth: false,
    });
    return await response.json();
  }

  async health(): Promise<{ status: string; mode: string }> {
    const response = await this.request("GET", "/healthz", { auth: false });
    return await response.json();
  }
}
