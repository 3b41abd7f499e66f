/** Page wiring: credentials pane, JDL editor, and the jobs table.
 *
 * All gateway traffic goes through GatewayApi; all signing stays in the
 * delegation module. This file only moves data between the DOM and those.
 */

import { ApiError, FetchLike, GatewayApi, JobSummary, ValidationResult } from "./api.js";
import {
  BrowserIdentity,
  loadIdentity,
  loadIdentityFromP12,
  runDelegation,
} from "./delegation.js";
import { packSandbox, SandboxFile } from "./sandbox.js";
import { colorClass, isJobStatus, UiJobRow } from "./status.js";
import { TEMPLATES, templateByName } from "./templates.js";

export const DEFAULT_POLL_INTERVAL_MS = 3000;

const TERMINAL = new Set(["DONE_OK", "DONE_FAILED", "ABORTED", "CANCELLED"]);

export interface UiOptions {
  baseUrl?: string;
  pollIntervalMs?: number;
  /** Hands a downloaded archive to the user; injectable for tests. */
  saveFile?: (name: string, bytes: Uint8Array) => void;
  fetchImpl?: FetchLike;
}

function defaultSaveFile(name: string, bytes: Uint8Array): void {
  const url = URL.createObjectURL(
    new Blob([bytes.slice().buffer as ArrayBuffer], { type: "application/gzip" }),
  );
  const anchor = document.createElement("a");
  anchor.href = url;
  anchor.download = name;
  anchor.click();
  setTimeout(() => URL.revokeObjectURL(url), 1000);
}

export class GridgateUi {
  readonly api: GatewayApi;

  private readonly doc: Document;
  private readonly pollIntervalMs: number;
  private readonly saveFile: (name: string, bytes: Uint8Array) => void;

  private identity: BrowserIdentity | null = null;
  private proxyExpiresAt: Date | null = null;
  private validated = false;
  private pollTimer: ReturnType<typeof setInterval> | null = null;
  private countdownTimer: ReturnType<typeof setInterval> | null = null;
  private pollInFlight = false;
  private lastRows: UiJobRow[] = [];

  constructor(doc: Document, options: UiOptions = {}) {
    this.doc = doc;
    this.api = new GatewayApi(options.baseUrl ?? "", { fetchImpl: options.fetchImpl });
    this.pollIntervalMs = options.pollIntervalMs ?? DEFAULT_POLL_INTERVAL_MS;
    this.saveFile = options.saveFile ?? defaultSaveFile;
  }

  /** Bind every handler; safe to call once after the DOM is ready. */
  mount(): void {
    for (const button of this.doc.querySelectorAll<HTMLButtonElement>("[data-tab]")) {
      button.addEventListener("click", () => this.showTab(button.dataset.tab!));
    }
    for (const template of TEMPLATES) {
      this.element<HTMLButtonElement>(`template-${template.name}`).addEventListener(
        "click",
        () => this.insertTemplate(template.name),
      );
    }
    this.element("delegate-button").addEventListener("click", () => {
      void this.guarded(() => this.delegateFromForm());
    });
    this.element("validate-button").addEventListener("click", () => {
      void this.guarded(() => this.validateNow());
    });
    this.element("submit-button").addEventListener("click", () => {
      void this.guarded(() => this.submitNow());
    });
    this.element<HTMLTextAreaElement>("jdl-editor").addEventListener("input", () => {
      this.validated = false;
      this.setValidateState("", "");
      this.refreshSubmitState();
    });
    this.refreshSubmitState();
    this.showTab("credentials");
  }

  dispose(): void {
    this.stopPolling();
    if (this.countdownTimer !== null) {
      clearInterval(this.countdownTimer);
      this.countdownTimer = null;
    }
  }

  // -- credentials

  async delegateFromForm(): Promise<void> {
    const certPem = this.element<HTMLTextAreaElement>("cert-pem").value.trim();
    const keyPem = this.element<HTMLTextAreaElement>("key-pem").value.trim();
    const p12Input = this.element<HTMLInputElement>("p12-file");
    const p12File = p12Input.files?.[0] ?? null;

    let identity: BrowserIdentity;
    if (p12File) {
      const password = this.element<HTMLInputElement>("p12-password").value;
      identity = await loadIdentityFromP12(
        new Uint8Array(await p12File.arrayBuffer()),
        password,
      );
    } else if (certPem && keyPem) {
      identity = await loadIdentity(certPem, keyPem);
    } else {
      throw new Error("paste a certificate and key, or pick a PKCS#12 file");
    }

    const hours = Number(this.element<HTMLInputElement>("lifetime-hours").value) || 12;
    const result = await runDelegation(this.api, identity, Math.round(hours * 3600));
    this.identity = identity;
    this.proxyExpiresAt = result.expiresAt;
    this.element("delegation-status").textContent =
      `Delegated as ${identity.cert.subject.text}`;
    this.startCountdown();
    this.refreshSubmitState();
    this.startPolling();
    this.toast(`proxy valid until ${result.expiresAt.toLocaleString()}`);
  }

  get delegated(): boolean {
    return this.identity !== null && this.api.token !== null;
  }

  private startCountdown(): void {
    if (this.countdownTimer !== null) {
      clearInterval(this.countdownTimer);
    }
    const update = () => {
      const target = this.element("proxy-countdown");
      if (!this.proxyExpiresAt) {
        target.textContent = "";
        return;
      }
      const left = Math.floor((this.proxyExpiresAt.getTime() - Date.now()) / 1000);
      if (left <= 0) {
        target.textContent = "proxy expired";
        return;
      }
      const hours = Math.floor(left / 3600);
      const minutes = Math.floor((left % 3600) / 60);
      const seconds = left % 60;
      target.textContent = `proxy expires in ${hours}h ${minutes}m ${seconds}s`;
    };
    update();
    this.countdownTimer = setInterval(update, 1000);
  }

  // -- editor

  insertTemplate(name: string): void {
    this.element<HTMLTextAreaElement>("jdl-editor").value = templateByName(name).text;
    this.validated = false;
    this.setValidateState("", "");
    this.refreshSubmitState();
  }

  async validateNow(): Promise<ValidationResult> {
    const text = this.element<HTMLTextAreaElement>("jdl-editor").value;
    const result = await this.api.validateJdl(text);
    const list = this.element<HTMLUListElement>("issue-list");
    list.replaceChildren();
    for (const issue of result.issues) {
      const item = this.doc.createElement("li");
      item.className = `issue issue-${issue.severity}`;
      const where = issue.line !== null ? `${issue.line}:${issue.column ?? 0} ` : "";
      item.textContent = `${where}${issue.severity} ${issue.code}: ${issue.message}`;
      list.append(item);
    }
    this.validated = result.valid;
    this.setValidateState(
      result.valid ? "ok" : "bad",
      result.valid ? "✓ valid" : "not valid",
    );
    this.refreshSubmitState();
    return result;
  }

  private setValidateState(kind: string, text: string): void {
    const state = this.element("validate-state");
    state.textContent = text;
    state.className = kind ? `validate-${kind}` : "";
  }

  private refreshSubmitState(): void {
    // submission stays locked until a proxy exists and the buffer validated
    const button = this.element<HTMLButtonElement>("submit-button");
    button.disabled = !(this.delegated && this.validated);
  }

  // -- submission

  async submitNow(): Promise<void> {
    if (!this.delegated || !this.validated) {
      throw new Error("delegate and validate before submitting");
    }
    const vo = this.element<HTMLInputElement>("vo-input").value.trim();
    if (!vo) {
      throw new Error("choose a virtual organisation");
    }
    const files = await this.collectSandboxFiles();
    const result = await this.api.submit({
      jdl: this.element<HTMLTextAreaElement>("jdl-editor").value,
      vo,
      sandbox: files.length ? await packSandbox(files) : undefined,
      myproxyUsername:
        this.element<HTMLInputElement>("myproxy-username").value.trim() || undefined,
      myproxyPassword:
        this.element<HTMLInputElement>("myproxy-password").value || undefined,
    });
    for (const warning of result.warnings) {
      this.toast(`warning: ${warning}`);
    }
    this.toast(
      result.job_ids.length === 1
        ? `submitted ${result.job_ids[0]}`
        : `submitted ${result.job_ids.length} jobs in collection ${result.collection_id}`,
    );
    this.showTab("jobs");
    this.startPolling();
    await this.pollOnce();
  }

  private async collectSandboxFiles(): Promise<SandboxFile[]> {
    const input = this.element<HTMLInputElement>("sandbox-files");
    const files: SandboxFile[] = [];
    for (const file of input.files ?? []) {
      files.push({ name: file.name, bytes: new Uint8Array(await file.arrayBuffer()) });
    }
    return files;
  }

  // -- jobs table

  startPolling(): void {
    if (this.pollTimer !== null) {
      return;
    }
    this.pollTimer = setInterval(() => {
      void this.pollOnce();
    }, this.pollIntervalMs);
    void this.pollOnce();
  }

  stopPolling(): void {
    if (this.pollTimer !== null) {
      clearInterval(this.pollTimer);
      this.pollTimer = null;
    }
  }

  /** One poll; never overlaps with an in-flight one. */
  async pollOnce(): Promise<void> {
    if (this.pollInFlight || !this.delegated) {
      return;
    }
    this.pollInFlight = true;
    try {
      const jobs = await this.api.jobs();
      this.renderJobs(jobs);
      this.element("jobs-stale").textContent = "";
    } catch (err) {
      // keep the last rows, but say they may be stale
      this.element("jobs-stale").textContent = "listing is stale";
      this.toast(err instanceof Error ? err.message : String(err));
    } finally {
      this.pollInFlight = false;
    }
  }

  /** The rows as last rendered, for anything that inspects table state. */
  get rows(): readonly UiJobRow[] {
    return this.lastRows;
  }

  private renderJobs(jobs: JobSummary[]): void {
    const body = this.element<HTMLTableSectionElement>("jobs-body");
    body.replaceChildren();
    this.lastRows = [];

    const collections = new Map<string, JobSummary[]>();
    const singles: JobSummary[] = [];
    for (const job of jobs) {
      if (job.collection_id) {
        const members = collections.get(job.collection_id) ?? [];
        members.push(job);
        collections.set(job.collection_id, members);
      } else {
        singles.push(job);
      }
    }

    for (const [collectionId, members] of collections) {
      const header = this.doc.createElement("tr");
      header.className = "collection-header";
      header.dataset.collection = collectionId;
      const cell = this.doc.createElement("td");
      cell.colSpan = 4;
      cell.textContent = `collection ${collectionId} (${members.length} jobs) `;
      const cancelAll = this.doc.createElement("button");
      cancelAll.textContent = "Terminate all";
      cancelAll.addEventListener("click", () => {
        void this.guarded(async () => {
          for (const member of members) {
            if (!TERMINAL.has(member.status) && member.status !== "CLEARED") {
              await this.api.cancel(member.id);
            }
          }
          await this.pollOnce();
        });
      });
      cell.append(cancelAll);
      header.append(cell);
      body.append(header);
      for (const member of members) {
        body.append(this.jobRow(member));
      }
    }
    for (const job of singles) {
      body.append(this.jobRow(job));
    }
  }

  private jobRow(job: JobSummary): HTMLTableRowElement {
    const status = isJobStatus(job.status) ? job.status : null;
    const chipClass = status ? colorClass(status) : "status-neutral";
    this.lastRows.push({
      id: job.id,
      status: status ?? "SUBMITTED",
      colorClass: chipClass,
      submittedAt: job.submitted_at,
      collectionId: job.collection_id,
    });

    const row = this.doc.createElement("tr");
    row.dataset.jobId = job.id;

    const idCell = this.doc.createElement("td");
    idCell.textContent = job.id;
    const statusCell = this.doc.createElement("td");
    const chip = this.doc.createElement("span");
    chip.className = `chip ${chipClass}`;
    chip.textContent = job.status;
    statusCell.append(chip);
    const whenCell = this.doc.createElement("td");
    whenCell.textContent = new Date(job.submitted_at.replace("Z", "+00:00")).toLocaleString();

    const actions = this.doc.createElement("td");
    if (job.status === "DONE_OK" || job.status === "DONE_FAILED") {
      const download = this.doc.createElement("button");
      download.textContent = "Output";
      download.className = "action-output";
      download.addEventListener("click", () => {
        void this.guarded(() => this.downloadOutput(job.id));
      });
      actions.append(download);
    }
    if (job.status !== "CLEARED") {
      const terminate = this.doc.createElement("button");
      terminate.textContent = TERMINAL.has(job.status) ? "Clear" : "Terminate";
      terminate.className = "action-terminate";
      terminate.addEventListener("click", () => {
        void this.guarded(async () => {
          await this.api.cancel(job.id);
          await this.pollOnce();
        });
      });
      actions.append(terminate);
    }

    row.append(idCell, statusCell, whenCell, actions);
    return row;
  }

  async downloadOutput(jobId: string): Promise<void> {
    const bytes = await this.api.output(jobId);
    this.saveFile(`${jobId}-output.tar.gz`, bytes);
    this.toast(`downloaded output of ${jobId}`);
  }

  // -- shared plumbing

  showTab(name: string): void {
    for (const section of this.doc.querySelectorAll<HTMLElement>("[data-pane]")) {
      section.hidden = section.dataset.pane !== name;
    }
    for (const button of this.doc.querySelectorAll<HTMLButtonElement>("[data-tab]")) {
      button.classList.toggle("active", button.dataset.tab === name);
    }
  }

  toast(message: string): void {
    const area = this.element("toast-area");
    const note = this.doc.createElement("div");
    note.className = "toast";
    note.textContent = message;
    area.append(note);
    setTimeout(() => note.remove(), 4000);
  }

  private async guarded(operation: () => Promise<unknown>): Promise<void> {
    try {
      await operation();
    } catch (err) {
      if (err instanceof ApiError || err instanceof Error) {
        this.toast(err.message);
      } else {
        this.toast(String(err));
      }
    }
  }

  private element<T extends HTMLElement = HTMLElement>(id: string): T {
    const found = this.doc.getElementById(id);
    if (!found) {
      throw new Error(`page is missing #${id}`);
    }
    return found as T;
  }
}
