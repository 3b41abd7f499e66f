/** The delegation handshake, run entirely in the page.
 *
 * init -> challenge -> upload -> ack, with the proxy signed by WebCrypto in
 * signProxyCertificate. The only fields ever sent are the user's DN, the
 * signed proxy certificate, and the public user certificate.
 */

import { GatewayApi } from "./api.js";
import { extractP12 } from "./p12.js";
import { pemToDer } from "./pem.js";
import {
  ParsedCertificate,
  ensureKeyMatchesCertificate,
  importPkcs8SigningKey,
  parseCertificate,
  signProxyCertificate,
} from "./x509.js";

export class DelegationError extends Error {}
export class DelegationRefusedError extends DelegationError {}
export class ProtocolError extends DelegationError {}

export interface BrowserIdentity {
  certPem: string;
  cert: ParsedCertificate;
  key: CryptoKey;
}

/** Import a PEM pair; rejects a key that does not match the certificate. */
export async function loadIdentity(certPem: string, keyPem: string): Promise<BrowserIdentity> {
  const cert = parseCertificate(certPem);
  const key = await importPkcs8SigningKey(pemToDer(keyPem, "PRIVATE KEY"));
  await ensureKeyMatchesCertificate(key, cert);
  return { certPem, cert, key };
}

/** Unpack a PKCS#12 archive locally and import the identity it holds. */
export async function loadIdentityFromP12(
  archive: Uint8Array,
  password: string,
): Promise<BrowserIdentity> {
  const extracted = await extractP12(archive, password);
  const cert = parseCertificate(extracted.certPem);
  const key = await importPkcs8SigningKey(extracted.keyPkcs8);
  await ensureKeyMatchesCertificate(key, cert);
  return { certPem: extracted.certPem, cert, key };
}

/** Compact JSON with recursively sorted keys: the protocol's canonical form. */
export function canonicalJson(value: unknown): string {
  if (Array.isArray(value)) {
    return `[${value.map(canonicalJson).join(",")}]`;
  }
  if (value !== null && typeof value === "object") {
    const entries = Object.entries(value as Record<string, unknown>)
      .sort(([a], [b]) => (a < b ? -1 : a > b ? 1 : 0))
      .map(([k, v]) => `${JSON.stringify(k)}:${canonicalJson(v)}`);
    return `{${entries.join(",")}}`;
  }
  return JSON.stringify(value);
}

interface AckMessage {
  type: "ack";
  session_id: string;
  status: string;
  effective_expiry: string | null;
  reason: string | null;
}

function parseReply(body: Uint8Array): Record<string, unknown> {
  let doc: unknown;
  try {
    doc = JSON.parse(new TextDecoder().decode(body));
  } catch {
    throw new ProtocolError("reply is not JSON");
  }
  if (doc === null || typeof doc !== "object" || Array.isArray(doc)) {
    throw new ProtocolError("reply is not a JSON object");
  }
  return doc as Record<string, unknown>;
}

function refusalFromAck(doc: Record<string, unknown>): DelegationRefusedError {
  const reason = typeof doc.reason === "string" ? doc.reason : "refused";
  return new DelegationRefusedError(reason);
}

export interface DelegationResult {
  token: string;
  expiresAt: Date;
}

/** Run the full handshake; on success the api object holds the session token. */
export async function runDelegation(
  api: GatewayApi,
  identity: BrowserIdentity,
  lifetimeSeconds: number,
): Promise<DelegationResult> {
  const encoder = new TextEncoder();
  const init = canonicalJson({ client_dn: identity.cert.subject.text, type: "init" });
  const challengeReply = await api.delegationExchange("/delegation/init", encoder.encode(init));
  const challenge = parseReply(challengeReply.body);
  if (challenge.type === "ack") {
    throw refusalFromAck(challenge);
  }
  if (challenge.type !== "challenge") {
    throw new ProtocolError(`expected a challenge, got ${String(challenge.type)}`);
  }
  const sessionId = challenge.session_id;
  const csrPem = challenge.csr_pem;
  if (typeof sessionId !== "string" || typeof csrPem !== "string") {
    throw new ProtocolError("challenge is missing its session or CSR");
  }

  const proxyPem = await signProxyCertificate({
    csrPem,
    issuerCert: identity.cert,
    signingKey: identity.key,
    lifetimeSeconds,
  });
  const upload = canonicalJson({
    proxy_cert_pem: proxyPem,
    session_id: sessionId,
    type: "upload",
    user_cert_pem: identity.certPem,
  });
  const ackReply = await api.delegationExchange("/delegation/complete", encoder.encode(upload));
  const ack = parseReply(ackReply.body) as Partial<AckMessage>;
  if (ack.type !== "ack") {
    throw new ProtocolError(`expected an ack, got ${String(ack.type)}`);
  }
  if (ack.status !== "ok") {
    throw refusalFromAck(ack as Record<string, unknown>);
  }
  if (typeof ack.effective_expiry !== "string") {
    throw new ProtocolError("ok ack carries no expiry");
  }
  if (!ackReply.token) {
    throw new ProtocolError("gateway granted no session token");
  }
  return {
    token: ackReply.token,
    expiresAt: new Date(ack.effective_expiry.replace("Z", "+00:00")),
  };
}
