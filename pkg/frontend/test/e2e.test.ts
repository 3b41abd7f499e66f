/** Full browser-side flow against a live gateway process: delegate, edit,
 *  submit a parametric collection, watch it finish, fetch output, terminate
 *  one member, and prove no private-key bytes ever crossed the network.
 */

import { readFileSync } from "node:fs";
import { join } from "node:path";

import { JSDOM } from "jsdom";
import { afterAll, beforeAll, describe, expect, it } from "vitest";

import { pemToDer } from "../dist/pem.js";
import { GridgateUi } from "../dist/ui.js";
import { importPkcs8SigningKey } from "../dist/x509.js";
import { RunningGateway, startGateway } from "./helpers.js";

interface CapturedCall {
  method: string;
  url: string;
  request: Uint8Array;
  response: Uint8Array;
}

interface SavedFile {
  name: string;
  bytes: Uint8Array;
}

const KNOWN_PATHS = new RegExp(
  "^/(healthz|jdl/validate|delegation/(init|complete)|jobs(/[^/]+(/output|/renew)?)?)$",
);

function sleep(ms: number): Promise<void> {
  return new Promise((resolve) => setTimeout(resolve, ms));
}

describe("browser flow", () => {
  let gateway: RunningGateway;
  let ui: GridgateUi;
  let doc: Document;
  let domWindow: JSDOM["window"];
  const capture: CapturedCall[] = [];
  const saved: SavedFile[] = [];

  beforeAll(async () => {
    gateway = await startGateway();
    const html = readFileSync(join(process.cwd(), "static", "index.html"), "utf-8");
    const dom = new JSDOM(html);
    domWindow = dom.window;
    doc = dom.window.document;

    const capturingFetch: typeof fetch = async (input, init) => {
      const url =
        typeof input === "string" ? input : input instanceof URL ? input.toString() : input.url;
      let request = new Uint8Array(0);
      if (init?.body) {
        request = new Uint8Array(
          await new Request("http://capture.local/", {
            method: "POST",
            body: init.body,
          }).arrayBuffer(),
        );
      }
      const response = await fetch(input, init);
      const snapshot = new Uint8Array(await response.clone().arrayBuffer());
      capture.push({ method: init?.method ?? "GET", url, request, response: snapshot });
      return response;
    };

    ui = new GridgateUi(doc, {
      baseUrl: gateway.baseUrl,
      pollIntervalMs: 150,
      saveFile: (name, bytes) => saved.push({ name, bytes }),
      fetchImpl: capturingFetch,
    });
    ui.mount();
  });

  afterAll(async () => {
    ui?.dispose();
    await gateway?.stop();
  });

  function input<T extends HTMLElement>(id: string): T {
    const found = doc.getElementById(id);
    if (!found) {
      throw new Error(`missing #${id}`);
    }
    return found as T;
  }

  function chipClasses(): string[] {
    return Array.from(doc.querySelectorAll("#jobs-body .chip")).map((chip) => chip.className);
  }

  it("runs delegate, submit, finish, download, terminate", async () => {
    // before anything happens, submission must be locked
    const submitButton = input<HTMLButtonElement>("submit-button");
    expect(submitButton.disabled).toBe(true);

    // delegate with pasted PEM credentials
    input<HTMLTextAreaElement>("cert-pem").value = gateway.certPem;
    input<HTMLTextAreaElement>("key-pem").value = gateway.keyPem;
    input<HTMLInputElement>("lifetime-hours").value = "6";
    await ui.delegateFromForm();

    expect(ui.delegated).toBe(true);
    expect(input("delegation-status").textContent).toContain(gateway.dn);
    expect(input("proxy-countdown").textContent).toMatch(/proxy expires in/);

    // delegated but nothing validated yet: still locked
    expect(submitButton.disabled).toBe(true);

    // pick the parametric template and edit it by hand
    input<HTMLButtonElement>("template-parametric").click();
    const editor = input<HTMLTextAreaElement>("jdl-editor");
    expect(editor.value).toContain("Parameters = 3");
    editor.value = editor.value.replace('--seed _PARAM_', '--seed _PARAM_ --fast');
    editor.dispatchEvent(new domWindow.Event("input"));
    expect(submitButton.disabled).toBe(true);

    // server-side validation unlocks submission
    const verdict = await ui.validateNow();
    expect(verdict.valid).toBe(true);
    expect(input("validate-state").textContent).toContain("valid");
    expect(submitButton.disabled).toBe(false);

    // submit the three-way parametric collection
    input<HTMLInputElement>("vo-input").value = gateway.vo;
    await ui.submitNow();

    expect(ui.rows).toHaveLength(3);
    const collectionId = ui.rows[0]!.collectionId;
    expect(collectionId).toBeTruthy();
    expect(ui.rows.every((row) => row.collectionId === collectionId)).toBe(true);
    expect(doc.querySelectorAll("#jobs-body tr.collection-header")).toHaveLength(1);
    expect(doc.querySelectorAll("#jobs-body tr[data-job-id]")).toHaveLength(3);

    // watch every row land on DONE_OK and turn green
    const deadline = Date.now() + 30_000;
    while (Date.now() < deadline) {
      await ui.pollOnce();
      if (ui.rows.length === 3 && ui.rows.every((row) => row.status === "DONE_OK")) {
        break;
      }
      await sleep(100);
    }
    expect(ui.rows.map((row) => row.status)).toEqual(["DONE_OK", "DONE_OK", "DONE_OK"]);
    expect(chipClasses().filter((c) => c.includes("status-green"))).toHaveLength(3);

    // download one member's output archive
    const firstId = ui.rows[0]!.id;
    await ui.downloadOutput(firstId);
    expect(saved).toHaveLength(1);
    expect(saved[0]!.name).toBe(`${firstId}-output.tar.gz`);
    expect(saved[0]!.bytes[0]).toBe(0x1f);
    expect(saved[0]!.bytes[1]).toBe(0x8b);
    const direct = await ui.api.output(firstId);
    expect(Buffer.from(saved[0]!.bytes).equals(Buffer.from(direct))).toBe(true);

    // terminate one member through its row button
    const victim = ui.rows[2]!.id;
    const row = doc.querySelector(`#jobs-body tr[data-job-id="${victim}"]`);
    expect(row).not.toBeNull();
    row!.querySelector<HTMLButtonElement>(".action-terminate")!.click();

    const clearDeadline = Date.now() + 15_000;
    while (Date.now() < clearDeadline) {
      await ui.pollOnce();
      const state = ui.rows.find((r) => r.id === victim);
      if (state && state.status === "CLEARED") {
        break;
      }
      await sleep(100);
    }
    const after = new Map(ui.rows.map((r) => [r.id, r.status]));
    expect(after.get(victim)).toBe("CLEARED");
    for (const other of ui.rows.filter((r) => r.id !== victim)) {
      expect(other.status).toBe("DONE_OK");
    }
    expect(chipClasses().filter((c) => c.includes("status-green"))).toHaveLength(2);
    const clearedRow = doc.querySelector(`#jobs-body tr[data-job-id="${victim}"]`);
    expect(clearedRow!.querySelector(".action-terminate")).toBeNull();
    expect(clearedRow!.querySelector(".action-output")).toBeNull();
  });

  it("never let private-key bytes cross the network", async () => {
    expect(capture.length).toBeGreaterThan(6);

    const keyDer = pemToDer(gateway.keyPem, "PRIVATE KEY");
    const keyB64 = gateway.keyPem
      .replace(/-----[A-Z ]+-----/g, "")
      .replace(/\s+/g, "");
    const keyHex = Buffer.from(keyDer).toString("hex");
    const signingKey = await importPkcs8SigningKey(keyDer);
    const jwk = await crypto.subtle.exportKey("jwk", signingKey);

    const needles = [
      "PRIVATE KEY",
      keyB64.slice(0, 48),
      keyB64.slice(0, 48).replace(/\+/g, "-").replace(/\//g, "_"),
      jwk.d!.slice(0, 48),
      jwk.p!.slice(0, 32),
      jwk.q!.slice(0, 32),
    ];

    for (const call of capture) {
      const bodies = [
        Buffer.from(call.request).toString("latin1"),
        Buffer.from(call.response).toString("latin1"),
      ];
      for (const body of bodies) {
        for (const needle of needles) {
          expect(body.includes(needle), `${call.method} ${call.url} leaked ${needle.slice(0, 16)}`).toBe(false);
        }
      }
      const requestHex = Buffer.from(call.request).toString("hex");
      expect(requestHex.includes(keyHex.slice(0, 64))).toBe(false);
    }
  });

  it("talks only to documented endpoints", () => {
    for (const call of capture) {
      expect(call.url.startsWith(gateway.baseUrl), call.url).toBe(true);
      const path = new URL(call.url).pathname;
      expect(KNOWN_PATHS.test(path), `${call.method} ${path}`).toBe(true);
    }
  });
});
