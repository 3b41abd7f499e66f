/** Certificate and CSR handling for in-browser proxy delegation.
 *
 * The page parses the user's certificate and the server's CSR, then builds
 * and signs the proxy certificate itself with WebCrypto. The private key is
 * imported into the crypto layer once and only signatures come back out.
 */

import {
  DerError,
  DerNode,
  TAG_BIT_STRING,
  TAG_GENERALIZED_TIME,
  TAG_INTEGER,
  TAG_SEQUENCE,
  TAG_UTC_TIME,
  children,
  decodeInteger,
  decodeOid,
  derBitString,
  derBoolean,
  derInteger,
  derNull,
  derOctetString,
  derOid,
  derTime,
  derUtf8String,
  expectTag,
  explicit,
  readTlv,
  sequence,
  set,
  tlv,
} from "./der.js";
import { base64UrlToBytes, derToPem, pemToDer } from "./pem.js";

export class CertificateParseError extends Error {}
export class SubjectMismatchError extends Error {}

const OID_COMMON_NAME = "2.5.4.3";
const OID_SHA256_RSA = "1.2.840.113549.1.1.11";
const OID_KEY_USAGE = "2.5.29.15";
const OID_PROXY_CERT_INFO = "1.3.6.1.5.5.7.1.14";

// SEQ { SEQ { OID inherit-all-policy } }
const PROXY_CERT_INFO_INHERIT_ALL = Uint8Array.from([
  0x30, 0x0c, 0x30, 0x0a, 0x06, 0x08, 0x2b, 0x06, 0x01, 0x05, 0x05, 0x07,
  0x15, 0x01,
]);

// digitalSignature + keyEncipherment; three meaningful bits, five unused
const KEY_USAGE_BITS = Uint8Array.of(0xa0);
const KEY_USAGE_UNUSED = 5;

const ATTR_NAMES: Record<string, string> = {
  "2.5.4.6": "C",
  "2.5.4.8": "ST",
  "2.5.4.7": "L",
  "2.5.4.10": "O",
  "2.5.4.11": "OU",
  "2.5.4.3": "CN",
  "0.9.2342.19200300.100.1.25": "DC",
  "0.9.2342.19200300.100.1.1": "UID",
  "1.2.840.113549.1.9.1": "emailAddress",
};

export interface ParsedName {
  /** The Name's complete DER, reusable verbatim in a new certificate. */
  raw: Uint8Array;
  /** Ordered (attribute, value) pairs. */
  parts: [string, string][];
  /** Slash-separated rendering, e.g. "/C=IT/O=SNS/CN=Alice". */
  text: string;
}

function escapeDnValue(value: string): string {
  return value.replace(/\\/g, "\\\\").replace(/\//g, "\\/");
}

function parseName(node: DerNode): ParsedName {
  expectTag(node, TAG_SEQUENCE, "Name");
  const parts: [string, string][] = [];
  for (const rdn of children(node)) {
    const attributes = children(rdn);
    if (attributes.length !== 1) {
      throw new CertificateParseError("multi-attribute RDNs are not supported");
    }
    const [typeNode, valueNode] = children(attributes[0]!);
    const oid = decodeOid(typeNode!);
    const name = ATTR_NAMES[oid] ?? oid;
    parts.push([name, new TextDecoder().decode(valueNode!.body)]);
  }
  const text = parts.map(([k, v]) => `/${k}=${escapeDnValue(v)}`).join("");
  return { raw: Uint8Array.from(node.raw), parts, text };
}

function parseTime(node: DerNode): Date {
  const text = new TextDecoder().decode(node.body);
  let iso: string;
  if (node.tag === TAG_UTC_TIME) {
    const century = Number(text.slice(0, 2)) >= 50 ? "19" : "20";
    iso = `${century}${text.slice(0, 2)}-${text.slice(2, 4)}-${text.slice(4, 6)}T${text.slice(6, 8)}:${text.slice(8, 10)}:${text.slice(10, 12)}Z`;
  } else if (node.tag === TAG_GENERALIZED_TIME) {
    iso = `${text.slice(0, 4)}-${text.slice(4, 6)}-${text.slice(6, 8)}T${text.slice(8, 10)}:${text.slice(10, 12)}:${text.slice(12, 14)}Z`;
  } else {
    throw new CertificateParseError(`unexpected time tag 0x${node.tag.toString(16)}`);
  }
  const date = new Date(iso);
  if (Number.isNaN(date.getTime())) {
    throw new CertificateParseError(`unparseable time ${text}`);
  }
  return date;
}

export interface ParsedCertificate {
  raw: Uint8Array;
  pem: string;
  serial: bigint;
  issuer: ParsedName;
  subject: ParsedName;
  notBefore: Date;
  notAfter: Date;
  /** SubjectPublicKeyInfo DER, reusable verbatim. */
  spki: Uint8Array;
  /** RSA modulus bytes, leading zero stripped. */
  modulus: Uint8Array;
}

export function modulusFromSpki(spki: Uint8Array): Uint8Array {
  // SPKI = SEQ { AlgorithmIdentifier, BIT STRING { RSAPublicKey } }
  const [, keyBits] = children(readTlv(spki));
  expectTag(keyBits!, TAG_BIT_STRING, "subjectPublicKey");
  if (keyBits!.body[0] !== 0) {
    throw new CertificateParseError("unexpected unused bits in public key");
  }
  const rsaKey = readTlv(keyBits!.body.subarray(1));
  const [modulus] = children(rsaKey);
  expectTag(modulus!, TAG_INTEGER, "modulus");
  let body = modulus!.body;
  while (body.length > 1 && body[0] === 0) {
    body = body.subarray(1);
  }
  return Uint8Array.from(body);
}

export function parseCertificate(pem: string): ParsedCertificate {
  const raw = pemToDer(pem, "CERTIFICATE");
  let tbsParts: DerNode[];
  let tbsChildren: DerNode[];
  try {
    const cert = readTlv(raw);
    tbsParts = children(cert);
    tbsChildren = children(expectTag(tbsParts[0]!, TAG_SEQUENCE, "tbsCertificate"));
  } catch (err) {
    if (err instanceof DerError) {
      throw new CertificateParseError(`not a certificate: ${err.message}`);
    }
    throw err;
  }
  // [0] version is optional; with it present the fixed fields shift by one
  const shift = tbsChildren[0]!.tag === 0xa0 ? 1 : 0;
  const serial = decodeInteger(tbsChildren[shift]!);
  const issuer = parseName(tbsChildren[shift + 2]!);
  const [notBeforeNode, notAfterNode] = children(
    expectTag(tbsChildren[shift + 3]!, TAG_SEQUENCE, "validity"),
  );
  const subject = parseName(tbsChildren[shift + 4]!);
  const spki = Uint8Array.from(tbsChildren[shift + 5]!.raw);
  return {
    raw,
    pem,
    serial,
    issuer,
    subject,
    notBefore: parseTime(notBeforeNode!),
    notAfter: parseTime(notAfterNode!),
    spki,
    modulus: modulusFromSpki(spki),
  };
}

export interface ParsedCsr {
  subject: ParsedName;
  spki: Uint8Array;
}

export function parseCsr(pem: string): ParsedCsr {
  const raw = pemToDer(pem, "CERTIFICATE REQUEST");
  try {
    const csr = readTlv(raw);
    const info = children(expectTag(children(csr)[0]!, TAG_SEQUENCE, "certificationRequestInfo"));
    return {
      subject: parseName(info[1]!),
      spki: Uint8Array.from(info[2]!.raw),
    };
  } catch (err) {
    if (err instanceof DerError) {
      throw new CertificateParseError(`not a CSR: ${err.message}`);
    }
    throw err;
  }
}

function subtle(): SubtleCrypto {
  const subtleCrypto = globalThis.crypto?.subtle;
  if (!subtleCrypto) {
    throw new Error("WebCrypto is unavailable in this context");
  }
  return subtleCrypto;
}

export async function importPkcs8SigningKey(pkcs8: Uint8Array): Promise<CryptoKey> {
  return await subtle().importKey(
    "pkcs8",
    pkcs8.slice().buffer as ArrayBuffer,
    { name: "RSASSA-PKCS1-v1_5", hash: "SHA-256" },
    true,
    ["sign"],
  );
}

/** The modulus of an imported RSA private key, for cert matching. */
export async function keyModulus(key: CryptoKey): Promise<Uint8Array> {
  const jwk = await subtle().exportKey("jwk", key);
  if (!jwk.n) {
    throw new CertificateParseError("key is not an RSA key");
  }
  return base64UrlToBytes(jwk.n);
}

function bytesEqual(a: Uint8Array, b: Uint8Array): boolean {
  if (a.length !== b.length) {
    return false;
  }
  let diff = 0;
  for (let i = 0; i < a.length; i++) {
    diff |= a[i]! ^ b[i]!;
  }
  return diff === 0;
}

/** Raise unless the private key matches the certificate's public key. */
export async function ensureKeyMatchesCertificate(
  key: CryptoKey,
  cert: ParsedCertificate,
): Promise<void> {
  if (!bytesEqual(await keyModulus(key), cert.modulus)) {
    throw new SubjectMismatchError(
      `the private key does not belong to the certificate for ${cert.subject.text}`,
    );
  }
}

function nameWithExtraCn(base: ParsedName, cn: string): Uint8Array {
  const rdns = children(readTlv(base.raw)).map((n) => Uint8Array.from(n.raw));
  const extra = set(sequence(derOid(OID_COMMON_NAME), derUtf8String(cn)));
  return sequence(...rdns, extra);
}

function extension(oid: string, critical: boolean, value: Uint8Array): Uint8Array {
  const parts = [derOid(oid)];
  if (critical) {
    parts.push(derBoolean(true));
  }
  parts.push(derOctetString(value));
  return sequence(...parts);
}

function randomSerial(): bigint {
  const bytes = new Uint8Array(8);
  globalThis.crypto.getRandomValues(bytes);
  let serial = 0n;
  for (const byte of bytes) {
    serial = (serial << 8n) | BigInt(byte);
  }
  return serial === 0n ? 1n : serial;
}

export interface SignProxyOptions {
  csrPem: string;
  issuerCert: ParsedCertificate;
  signingKey: CryptoKey;
  lifetimeSeconds: number;
  now?: Date;
}

/** Build and sign the proxy certificate answering a delegation challenge.
 *
 * The subject extends the issuer subject by CN=<decimal serial>; validity
 * is clamped to the issuer's window; the proxy marker extension and a
 * signature-only key usage are set, both critical.
 */
export async function signProxyCertificate(options: SignProxyOptions): Promise<string> {
  const { csrPem, issuerCert, signingKey, lifetimeSeconds } = options;
  if (lifetimeSeconds <= 0) {
    throw new RangeError("lifetime must be positive");
  }
  const csr = parseCsr(csrPem);
  if (csr.subject.text !== issuerCert.subject.text) {
    throw new SubjectMismatchError(
      `challenge is for ${csr.subject.text}, not ${issuerCert.subject.text}`,
    );
  }
  await ensureKeyMatchesCertificate(signingKey, issuerCert);

  const now = options.now ?? new Date();
  const notBefore = new Date(Math.floor(now.getTime() / 1000) * 1000);
  const requested = new Date(notBefore.getTime() + lifetimeSeconds * 1000);
  const notAfter = requested < issuerCert.notAfter ? requested : issuerCert.notAfter;
  if (notBefore >= issuerCert.notAfter) {
    throw new CertificateParseError("issuer certificate has expired");
  }

  const serial = randomSerial();
  const algorithm = sequence(derOid(OID_SHA256_RSA), derNull());
  const extensions = explicit(
    3,
    sequence(
      extension(OID_KEY_USAGE, true, derBitString(KEY_USAGE_BITS, KEY_USAGE_UNUSED)),
      extension(OID_PROXY_CERT_INFO, true, PROXY_CERT_INFO_INHERIT_ALL),
    ),
  );
  const tbs = sequence(
    explicit(0, derInteger(2n)), // v3
    derInteger(serial),
    algorithm,
    Uint8Array.from(issuerCert.subject.raw),
    sequence(derTime(notBefore), derTime(notAfter)),
    nameWithExtraCn(issuerCert.subject, serial.toString(10)),
    csr.spki,
    extensions,
  );
  const signature = new Uint8Array(
    await subtle().sign("RSASSA-PKCS1-v1_5", options.signingKey, tbs.slice().buffer as ArrayBuffer),
  );
  const certificate = sequence(tbs, algorithm, derBitString(signature));
  return derToPem(certificate, "CERTIFICATE");
}
