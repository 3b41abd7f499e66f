/** Bridges to the Python gateway used as the test oracle and live peer. */

import { ChildProcess, spawn, spawnSync } from "node:child_process";
import { mkdtempSync, readFileSync, rmSync, writeFileSync } from "node:fs";
import { tmpdir } from "node:os";
import { join } from "node:path";

export function python(code: string, input?: Uint8Array): Buffer {
  const result = spawnSync("python3", ["-c", code], {
    input,
    maxBuffer: 64 * 1024 * 1024,
  });
  if (result.status !== 0) {
    throw new Error(`python oracle failed:\n${result.stderr.toString()}`);
  }
  return result.stdout;
}

export function pythonJson<T>(code: string, input?: Uint8Array): T {
  return JSON.parse(python(code, input).toString()) as T;
}

export interface IdentityFixture {
  certPem: string;
  keyPem: string;
  caPem: string;
  dn: string;
}

/** A deterministic CA-signed identity produced by the primary package. */
export function makeIdentity(seed: number, commonName: string): IdentityFixture {
  return pythonJson<IdentityFixture>(`
import json, sys
from cryptography.hazmat.primitives import serialization
from gridgate.certs import TestCa

ca = TestCa.generate(seed=${seed})
user = ca.issue_user("/C=IT/O=Web Tests/CN=${commonName}")
key_pem = user.private_key.private_bytes(
    serialization.Encoding.PEM,
    serialization.PrivateFormat.PKCS8,
    serialization.NoEncryption(),
).decode()
json.dump({
    "certPem": user.certificate.pem(),
    "keyPem": key_pem,
    "caPem": ca.certificate.pem(),
    "dn": user.subject.render(),
}, sys.stdout)
`);
}

const FAST_TIMETABLE = '[[null, "READY", 0.05], [null, "RUNNING", 0.15], [null, "DONE_OK", 0.4]]';

export interface RunningGateway {
  baseUrl: string;
  dir: string;
  certPem: string;
  keyPem: string;
  dn: string;
  vo: string;
  stop(): Promise<void>;
}

async function healthy(baseUrl: string): Promise<boolean> {
  try {
    const response = await fetch(`${baseUrl}/healthz`);
    return response.ok;
  } catch {
    return false;
  }
}

/** Launch a real gateway process seeded with one web user. */
export async function startGateway(): Promise<RunningGateway> {
  const dir = mkdtempSync(join(tmpdir(), "gridgate-ui-"));
  const generated = spawnSync(
    "gridgate",
    ["gen-test-ca", "--seed", "11", "--out", dir, "--user", "Web User", "--user-vo", "webvo"],
    { maxBuffer: 1024 * 1024 },
  );
  if (generated.status !== 0) {
    throw new Error(`gen-test-ca failed:\n${generated.stderr.toString()}`);
  }
  writeFileSync(join(dir, "timetable.json"), FAST_TIMETABLE);

  let lastError = "";
  for (let attempt = 0; attempt < 3; attempt++) {
    const port = 20000 + Math.floor(Math.random() * 20000);
    const baseUrl = `http://127.0.0.1:${port}`;
    const configPath = join(dir, "gateway.conf");
    writeFileSync(
      configPath,
      [
        `listen_addr = 127.0.0.1:${port}`,
        `trust_anchor_dir = ${join(dir, "trust")}`,
        `vo_registry = ${join(dir, "vo-registry.tsv")}`,
        "mode = simulate",
        `timetable_path = ${join(dir, "timetable.json")}`,
        "",
      ].join("\n"),
    );
    const proc: ChildProcess = spawn("gridgate", ["serve", "--config", configPath], {
      stdio: ["ignore", "pipe", "pipe"],
    });
    let stderr = "";
    proc.stderr?.on("data", (chunk) => {
      stderr += String(chunk);
    });

    for (let tick = 0; tick < 80; tick++) {
      if (proc.exitCode !== null) {
        break;
      }
      if (await healthy(baseUrl)) {
        return {
          baseUrl,
          dir,
          certPem: readFileSync(join(dir, "web_user_cert.pem"), "utf-8"),
          keyPem: readFileSync(join(dir, "web_user_key.pem"), "utf-8"),
          dn: "/C=IT/O=GridGate Users/CN=Web User",
          vo: "webvo",
          stop: async () => {
            proc.kill("SIGTERM");
            await new Promise<void>((resolve) => {
              proc.once("exit", () => resolve());
              setTimeout(() => {
                proc.kill("SIGKILL");
                resolve();
              }, 3000).unref();
            });
            rmSync(dir, { recursive: true, force: true });
          },
        };
      }
      await new Promise((resolve) => setTimeout(resolve, 250));
    }
    proc.kill("SIGKILL");
    lastError = stderr;
  }
  rmSync(dir, { recursive: true, force: true });
  throw new Error(`gateway never became healthy:\n${lastError}`);
}
