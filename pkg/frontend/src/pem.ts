/** Base64 and PEM plumbing shared by the certificate and archive code. */

export class PemDecodeError extends Error {}

export function bytesToBase64(bytes: Uint8Array): string {
  let binary = "";
  const chunk = 0x8000;
  for (let i = 0; i < bytes.length; i += chunk) {
    binary += String.fromCharCode(...bytes.subarray(i, i + chunk));
  }
  return btoa(binary);
}

export function base64ToBytes(text: string): Uint8Array {
  const binary = atob(text);
  const bytes = new Uint8Array(binary.length);
  for (let i = 0; i < binary.length; i++) {
    bytes[i] = binary.charCodeAt(i);
  }
  return bytes;
}

export function base64UrlToBytes(text: string): Uint8Array {
  const padded = text.replace(/-/g, "+").replace(/_/g, "/");
  return base64ToBytes(padded + "=".repeat((4 - (padded.length % 4)) % 4));
}

export function bytesToHex(bytes: Uint8Array): string {
  return Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
}

export function derToPem(der: Uint8Array, label: string): string {
  const body = bytesToBase64(der);
  const lines: string[] = [];
  for (let i = 0; i < body.length; i += 64) {
    lines.push(body.slice(i, i + 64));
  }
  return `-----BEGIN ${label}-----\n${lines.join("\n")}\n-----END ${label}-----\n`;
}

/** Decode the first PEM block; when a label is given it must match. */
export function pemToDer(pem: string, label?: string): Uint8Array {
  const match = /-----BEGIN ([A-Z0-9 ]+)-----([\s\S]*?)-----END \1-----/.exec(pem);
  if (!match) {
    throw new PemDecodeError("no PEM block found");
  }
  const [, found, body] = match;
  if (label !== undefined && found !== label) {
    throw new PemDecodeError(`expected a ${label} block, found ${found}`);
  }
  try {
    return base64ToBytes(body!.replace(/[\s]/g, ""));
  } catch {
    throw new PemDecodeError("PEM body is not valid base64");
  }
}
