/** PKCS#12 unpacking inside the browser.
 *
 * Parsing the archive locally is what keeps the private key off the wire:
 * the password and the key bytes never leave the page. Supports the PBES2
 * profile (PBKDF2 with SHA-1/SHA-256, AES-CBC) plus unencrypted bags, and
 * checks the archive MAC when present.
 */

import {
  DerError,
  DerNode,
  TAG_INTEGER,
  TAG_OCTET_STRING,
  TAG_SEQUENCE,
  children,
  decodeInteger,
  decodeOid,
  expectTag,
  readTlv,
} from "./der.js";
import { derToPem } from "./pem.js";

export class MalformedArchiveError extends Error {}
export class BadPasswordError extends Error {}

const OID_DATA = "1.2.840.113549.1.7.1";
const OID_ENCRYPTED_DATA = "1.2.840.113549.1.7.6";
const OID_PBES2 = "1.2.840.113549.1.5.13";
const OID_PBKDF2 = "1.2.840.113549.1.5.12";
const OID_HMAC_SHA1 = "1.2.840.113549.2.7";
const OID_HMAC_SHA256 = "1.2.840.113549.2.9";
const OID_SHA256 = "2.16.840.1.101.3.4.2.1";
const OID_KEY_BAG = "1.2.840.113549.1.12.10.1.1";
const OID_SHROUDED_KEY_BAG = "1.2.840.113549.1.12.10.1.2";
const OID_CERT_BAG = "1.2.840.113549.1.12.10.1.3";
const OID_X509_CERT = "1.2.840.113549.1.9.22.1";

const AES_KEY_BYTES: Record<string, number> = {
  "2.16.840.1.101.3.4.1.2": 16,
  "2.16.840.1.101.3.4.1.22": 24,
  "2.16.840.1.101.3.4.1.42": 32,
};

export interface ExtractedIdentity {
  certPem: string;
  /** Unencrypted PKCS#8 DER, ready for WebCrypto import. */
  keyPkcs8: Uint8Array;
}

function subtle(): SubtleCrypto {
  const subtleCrypto = globalThis.crypto?.subtle;
  if (!subtleCrypto) {
    throw new Error("WebCrypto is unavailable in this context");
  }
  return subtleCrypto;
}

function malformed(message: string): never {
  throw new MalformedArchiveError(message);
}

function parse<T>(what: string, thunk: () => T): T {
  try {
    return thunk();
  } catch (err) {
    if (err instanceof DerError || err instanceof RangeError) {
      malformed(`${what}: ${err.message}`);
    }
    throw err;
  }
}

function toBuffer(bytes: Uint8Array): ArrayBuffer {
  return bytes.slice().buffer as ArrayBuffer;
}

/** Password as UTF-16BE with a trailing two-byte null terminator. */
function bmpPassword(password: string): Uint8Array {
  const out = new Uint8Array((password.length + 1) * 2);
  for (let i = 0; i < password.length; i++) {
    const unit = password.charCodeAt(i);
    out[2 * i] = unit >> 8;
    out[2 * i + 1] = unit & 0xff;
  }
  return out;
}

function repeatToMultiple(bytes: Uint8Array, block: number): Uint8Array {
  if (bytes.length === 0) {
    return bytes;
  }
  const length = Math.ceil(bytes.length / block) * block;
  const out = new Uint8Array(length);
  for (let i = 0; i < length; i++) {
    out[i] = bytes[i % bytes.length]!;
  }
  return out;
}

/** The PKCS#12 key derivation (SHA-256 flavor), used only for the MAC. */
async function pkcs12KeyDerive(
  password: string,
  salt: Uint8Array,
  id: number,
  iterations: number,
  wanted: number,
): Promise<Uint8Array> {
  const u = 32;
  const v = 64;
  const diversifier = new Uint8Array(v).fill(id);
  const combined = new Uint8Array([
    ...repeatToMultiple(salt, v),
    ...repeatToMultiple(bmpPassword(password), v),
  ]);
  const out = new Uint8Array(wanted);
  let written = 0;
  while (written < wanted) {
    let round = new Uint8Array(
      await subtle().digest("SHA-256", toBuffer(new Uint8Array([...diversifier, ...combined]))),
    );
    for (let i = 1; i < iterations; i++) {
      round = new Uint8Array(await subtle().digest("SHA-256", toBuffer(round)));
    }
    out.set(round.subarray(0, Math.min(u, wanted - written)), written);
    written += u;
    if (written >= wanted) {
      break;
    }
    // I_j = (I_j + B + 1) mod 2^(v*8) on every v-byte block of I
    const adder = repeatToMultiple(round, v).subarray(0, v);
    for (let block = 0; block < combined.length; block += v) {
      let carry = 1;
      for (let i = v - 1; i >= 0; i--) {
        const sum = combined[block + i]! + adder[i]! + carry;
        combined[block + i] = sum & 0xff;
        carry = sum >> 8;
      }
    }
  }
  return out;
}

interface Pbes2Params {
  salt: Uint8Array;
  iterations: number;
  hash: "SHA-1" | "SHA-256";
  keyBytes: number;
  iv: Uint8Array;
}

function parsePbes2(algorithm: DerNode): Pbes2Params {
  const [algOid, params] = children(algorithm);
  if (decodeOid(algOid!) !== OID_PBES2) {
    malformed(`unsupported encryption scheme ${decodeOid(algOid!)}`);
  }
  const [kdf, scheme] = children(expectTag(params!, TAG_SEQUENCE, "PBES2 params"));
  const [kdfOid, kdfParamsNode] = children(kdf!);
  if (decodeOid(kdfOid!) !== OID_PBKDF2) {
    malformed("PBES2 without PBKDF2 is not supported");
  }
  const kdfParams = children(expectTag(kdfParamsNode!, TAG_SEQUENCE, "PBKDF2 params"));
  const salt = expectTag(kdfParams[0]!, TAG_OCTET_STRING, "salt").body;
  const iterations = Number(decodeInteger(kdfParams[1]!));
  let hash: Pbes2Params["hash"] = "SHA-1";
  for (const extra of kdfParams.slice(2)) {
    if (extra.tag === TAG_SEQUENCE) {
      const prf = decodeOid(children(extra)[0]!);
      if (prf === OID_HMAC_SHA256) {
        hash = "SHA-256";
      } else if (prf !== OID_HMAC_SHA1) {
        malformed(`unsupported PBKDF2 PRF ${prf}`);
      }
    }
  }
  const [encOid, ivNode] = children(scheme!);
  const keyBytes = AES_KEY_BYTES[decodeOid(encOid!)];
  if (keyBytes === undefined) {
    malformed(`unsupported cipher ${decodeOid(encOid!)}`);
  }
  const iv = expectTag(ivNode!, TAG_OCTET_STRING, "IV").body;
  return {
    salt: Uint8Array.from(salt),
    iterations,
    hash,
    keyBytes: keyBytes!,
    iv: Uint8Array.from(iv),
  };
}

async function pbes2Decrypt(
  algorithm: DerNode,
  ciphertext: Uint8Array,
  password: string,
): Promise<Uint8Array> {
  const params = parse("PBES2 algorithm", () => parsePbes2(algorithm));
  const baseKey = await subtle().importKey(
    "raw",
    toBuffer(new TextEncoder().encode(password)),
    "PBKDF2",
    false,
    ["deriveBits"],
  );
  const bits = await subtle().deriveBits(
    {
      name: "PBKDF2",
      salt: toBuffer(params.salt),
      iterations: params.iterations,
      hash: params.hash,
    },
    baseKey,
    params.keyBytes * 8,
  );
  const aesKey = await subtle().importKey("raw", bits, "AES-CBC", false, ["decrypt"]);
  try {
    return new Uint8Array(
      await subtle().decrypt({ name: "AES-CBC", iv: toBuffer(params.iv) }, aesKey, toBuffer(ciphertext)),
    );
  } catch {
    // wrong key shows up as a padding failure
    throw new BadPasswordError("decryption failed; wrong password?");
  }
}

async function verifyMac(
  macData: DerNode,
  content: Uint8Array,
  password: string,
): Promise<void> {
  const [digestInfo, saltNode, iterationsNode] = parse("MacData", () => children(macData));
  const [algorithmNode, digestNode] = parse("DigestInfo", () => children(digestInfo!));
  const digestOid = parse("MAC digest", () => decodeOid(children(algorithmNode!)[0]!));
  if (digestOid !== OID_SHA256) {
    malformed(`unsupported MAC digest ${digestOid}`);
  }
  const salt = expectTag(saltNode!, TAG_OCTET_STRING, "macSalt").body;
  const iterations = iterationsNode ? Number(decodeInteger(iterationsNode)) : 1;
  const macKey = await pkcs12KeyDerive(password, Uint8Array.from(salt), 3, iterations, 32);
  const key = await subtle().importKey(
    "raw",
    toBuffer(macKey),
    { name: "HMAC", hash: "SHA-256" },
    false,
    ["verify"],
  );
  const expected = expectTag(digestNode!, TAG_OCTET_STRING, "MAC digest").body;
  const ok = await subtle().verify("HMAC", key, toBuffer(Uint8Array.from(expected)), toBuffer(content));
  if (!ok) {
    throw new BadPasswordError("archive MAC does not verify; wrong password?");
  }
}

/** ContentInfo -> the SafeContents DER it carries, decrypting if needed. */
async function openContentInfo(info: DerNode, password: string): Promise<Uint8Array> {
  const [typeNode, contentWrapper] = parse("ContentInfo", () => children(info));
  const contentType = decodeOid(typeNode!);
  const content = parse("ContentInfo content", () => readTlv(contentWrapper!.body));
  if (contentType === OID_DATA) {
    return Uint8Array.from(expectTag(content, TAG_OCTET_STRING, "data content").body);
  }
  if (contentType === OID_ENCRYPTED_DATA) {
    const fields = parse("EncryptedData", () => children(content));
    const encInfo = parse("EncryptedContentInfo", () =>
      children(expectTag(fields[1]!, TAG_SEQUENCE, "encryptedContentInfo")),
    );
    const algorithm = encInfo[1]!;
    const encryptedContent = encInfo[2];
    if (!encryptedContent || (encryptedContent.tag & 0x1f) !== 0) {
      malformed("EncryptedData has no encrypted content");
    }
    const ciphertext =
      encryptedContent!.tag & 0x20
        ? Uint8Array.from(
            parse("chunked content", () =>
              children(encryptedContent!).flatMap((n) => Array.from(n.body)),
            ),
          )
        : Uint8Array.from(encryptedContent!.body);
    return await pbes2Decrypt(algorithm, ciphertext, password);
  }
  malformed(`unsupported ContentInfo type ${contentType}`);
}

interface CollectedBags {
  certs: Uint8Array[];
  keys: Uint8Array[];
}

async function collectBags(
  safeContents: Uint8Array,
  password: string,
  into: CollectedBags,
): Promise<void> {
  const bags = parse("SafeContents", () => children(readTlv(safeContents)));
  for (const bag of bags) {
    const [bagIdNode, bagValueNode] = parse("SafeBag", () => children(bag));
    const bagId = decodeOid(bagIdNode!);
    const value = parse("bag value", () => readTlv(bagValueNode!.body));
    if (bagId === OID_CERT_BAG) {
      const [certIdNode, certValueNode] = parse("CertBag", () => children(value));
      if (decodeOid(certIdNode!) !== OID_X509_CERT) {
        continue; // some other certificate format; not ours
      }
      const octets = parse("certificate octets", () => readTlv(certValueNode!.body));
      into.certs.push(Uint8Array.from(expectTag(octets, TAG_OCTET_STRING, "certificate").body));
    } else if (bagId === OID_KEY_BAG) {
      into.keys.push(Uint8Array.from(value.raw));
    } else if (bagId === OID_SHROUDED_KEY_BAG) {
      const [algorithm, encrypted] = parse("EncryptedPrivateKeyInfo", () => children(value));
      into.keys.push(
        await pbes2Decrypt(
          algorithm!,
          Uint8Array.from(expectTag(encrypted!, TAG_OCTET_STRING, "encrypted key").body),
          password,
        ),
      );
    }
    // other bag kinds carry nothing we need
  }
}

/** Unpack a PKCS#12 archive into the certificate PEM and the PKCS#8 key. */
export async function extractP12(
  archive: Uint8Array,
  password: string,
): Promise<ExtractedIdentity> {
  const pfxChildren = parse("PKCS#12 archive", () => {
    const pfx = readTlv(archive);
    expectTag(pfx, TAG_SEQUENCE, "PFX");
    if (pfx.end !== archive.length) {
      malformed("trailing bytes after the archive");
    }
    return children(pfx);
  });
  const version = parse("PFX version", () => decodeInteger(expectTag(pfxChildren[0]!, TAG_INTEGER, "version")));
  if (version !== 3n) {
    malformed(`PFX version ${version} is not supported`);
  }
  const authSafeContent = parse("authSafe", () => {
    const [typeNode, wrapper] = children(expectTag(pfxChildren[1]!, TAG_SEQUENCE, "authSafe"));
    if (decodeOid(typeNode!) !== OID_DATA) {
      malformed("authSafe must be of type data");
    }
    return Uint8Array.from(
      expectTag(readTlv(wrapper!.body), TAG_OCTET_STRING, "authSafe content").body,
    );
  });
  if (pfxChildren.length > 2) {
    await verifyMac(pfxChildren[2]!, authSafeContent, password);
  }

  const collected: CollectedBags = { certs: [], keys: [] };
  const contentInfos = parse("AuthenticatedSafe", () => children(readTlv(authSafeContent)));
  for (const info of contentInfos) {
    await collectBags(await openContentInfo(info, password), password, collected);
  }
  if (collected.certs.length !== 1 || collected.keys.length !== 1) {
    malformed(
      `expected one certificate and one key, found ${collected.certs.length} and ${collected.keys.length}`,
    );
  }
  return {
    certPem: derToPem(collected.certs[0]!, "CERTIFICATE"),
    keyPkcs8: collected.keys[0]!,
  };
}
