/** Minimal DER encode/decode, enough for certificates and PKCS archives. */

export class DerError extends Error {}

export const TAG_BOOLEAN = 0x01;
export const TAG_INTEGER = 0x02;
export const TAG_BIT_STRING = 0x03;
export const TAG_OCTET_STRING = 0x04;
export const TAG_NULL = 0x05;
export const TAG_OID = 0x06;
export const TAG_UTF8_STRING = 0x0c;
export const TAG_PRINTABLE_STRING = 0x13;
export const TAG_IA5_STRING = 0x16;
export const TAG_UTC_TIME = 0x17;
export const TAG_GENERALIZED_TIME = 0x18;
export const TAG_BMP_STRING = 0x1e;
export const TAG_SEQUENCE = 0x30;
export const TAG_SET = 0x31;

export interface DerNode {
  /** Full identifier octet, class and constructed bits included. */
  tag: number;
  /** Content octets. */
  body: Uint8Array;
  /** The complete TLV, header included. */
  raw: Uint8Array;
  /** Offset of the octet after this TLV, relative to the parse buffer. */
  end: number;
}

function concat(parts: Uint8Array[]): Uint8Array {
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let at = 0;
  for (const part of parts) {
    out.set(part, at);
    at += part.length;
  }
  return out;
}

function encodeLength(length: number): Uint8Array {
  if (length < 0x80) {
    return Uint8Array.of(length);
  }
  const digits: number[] = [];
  for (let v = length; v > 0; v >>>= 8) {
    digits.unshift(v & 0xff);
  }
  return Uint8Array.of(0x80 | digits.length, ...digits);
}

export function tlv(tag: number, body: Uint8Array): Uint8Array {
  return concat([Uint8Array.of(tag), encodeLength(body.length), body]);
}

export function sequence(...parts: Uint8Array[]): Uint8Array {
  return tlv(TAG_SEQUENCE, concat(parts));
}

export function set(...parts: Uint8Array[]): Uint8Array {
  return tlv(TAG_SET, concat(parts));
}

/** [n] EXPLICIT wrapper (constructed context tag). */
export function explicit(tagNumber: number, inner: Uint8Array): Uint8Array {
  return tlv(0xa0 | tagNumber, inner);
}

export function derNull(): Uint8Array {
  return Uint8Array.of(TAG_NULL, 0x00);
}

export function derBoolean(value: boolean): Uint8Array {
  return Uint8Array.of(TAG_BOOLEAN, 0x01, value ? 0xff : 0x00);
}

/** Unsigned big integer in minimal two's-complement form. */
export function derInteger(value: bigint | number): Uint8Array {
  let v = BigInt(value);
  if (v < 0n) {
    throw new DerError("negative integers are not needed here");
  }
  const digits: number[] = [];
  if (v === 0n) {
    digits.push(0);
  }
  for (; v > 0n; v >>= 8n) {
    digits.unshift(Number(v & 0xffn));
  }
  if (digits[0]! & 0x80) {
    digits.unshift(0); // keep the sign bit clear
  }
  return tlv(TAG_INTEGER, Uint8Array.from(digits));
}

export function derOctetString(bytes: Uint8Array): Uint8Array {
  return tlv(TAG_OCTET_STRING, bytes);
}

export function derBitString(bytes: Uint8Array, unusedBits = 0): Uint8Array {
  return tlv(TAG_BIT_STRING, concat([Uint8Array.of(unusedBits), bytes]));
}

export function derUtf8String(text: string): Uint8Array {
  return tlv(TAG_UTF8_STRING, new TextEncoder().encode(text));
}

export function derOid(dotted: string): Uint8Array {
  const parts = dotted.split(".").map((p) => {
    const n = Number(p);
    if (!Number.isInteger(n) || n < 0) {
      throw new DerError(`bad OID component ${p} in ${dotted}`);
    }
    return n;
  });
  if (parts.length < 2) {
    throw new DerError(`OID needs at least two components: ${dotted}`);
  }
  const body: number[] = [parts[0]! * 40 + parts[1]!];
  for (const part of parts.slice(2)) {
    const groups: number[] = [];
    let v = part;
    do {
      groups.unshift(v & 0x7f);
      v >>>= 7;
    } while (v > 0);
    for (let i = 0; i < groups.length - 1; i++) {
      groups[i]! |= 0x80;
    }
    body.push(...groups);
  }
  return tlv(TAG_OID, Uint8Array.from(body));
}

/** UTCTime, the X.509 form for dates before 2050. */
export function derUtcTime(date: Date): Uint8Array {
  const year = date.getUTCFullYear();
  if (year < 1950 || year >= 2050) {
    throw new DerError(`${year} is outside the UTCTime range`);
  }
  const pad = (n: number) => String(n).padStart(2, "0");
  const text =
    pad(year % 100) +
    pad(date.getUTCMonth() + 1) +
    pad(date.getUTCDate()) +
    pad(date.getUTCHours()) +
    pad(date.getUTCMinutes()) +
    pad(date.getUTCSeconds()) +
    "Z";
  return tlv(TAG_UTC_TIME, new TextEncoder().encode(text));
}

/** Certificate time: UTCTime before 2050, GeneralizedTime from then on. */
export function derTime(date: Date): Uint8Array {
  if (date.getUTCFullYear() < 2050) {
    return derUtcTime(date);
  }
  const pad = (n: number) => String(n).padStart(2, "0");
  const text =
    String(date.getUTCFullYear()).padStart(4, "0") +
    pad(date.getUTCMonth() + 1) +
    pad(date.getUTCDate()) +
    pad(date.getUTCHours()) +
    pad(date.getUTCMinutes()) +
    pad(date.getUTCSeconds()) +
    "Z";
  return tlv(TAG_GENERALIZED_TIME, new TextEncoder().encode(text));
}

/** Parse the TLV starting at offset; body is a view, raw includes the header. */
export function readTlv(bytes: Uint8Array, offset = 0): DerNode {
  if (offset + 2 > bytes.length) {
    throw new DerError("truncated TLV header");
  }
  const tag = bytes[offset]!;
  if ((tag & 0x1f) === 0x1f) {
    throw new DerError("multi-byte tags are not supported");
  }
  let lengthByte = bytes[offset + 1]!;
  let headerLen = 2;
  let length: number;
  if (lengthByte < 0x80) {
    length = lengthByte;
  } else {
    const count = lengthByte & 0x7f;
    if (count === 0 || count > 4) {
      throw new DerError("unsupported DER length form");
    }
    if (offset + 2 + count > bytes.length) {
      throw new DerError("truncated TLV length");
    }
    length = 0;
    for (let i = 0; i < count; i++) {
      length = length * 256 + bytes[offset + 2 + i]!;
    }
    headerLen = 2 + count;
  }
  const end = offset + headerLen + length;
  if (end > bytes.length) {
    throw new DerError("TLV body runs past the buffer");
  }
  return {
    tag,
    body: bytes.subarray(offset + headerLen, end),
    raw: bytes.subarray(offset, end),
    end,
  };
}

/** The child TLVs of a constructed node, in order. */
export function children(node: DerNode): DerNode[] {
  if (!(node.tag & 0x20)) {
    throw new DerError(`tag 0x${node.tag.toString(16)} is not constructed`);
  }
  const out: DerNode[] = [];
  let at = 0;
  while (at < node.body.length) {
    const child = readTlv(node.body, at);
    out.push(child);
    at = child.end;
  }
  return out;
}

export function expectTag(node: DerNode, tag: number, what: string): DerNode {
  if (node.tag !== tag) {
    throw new DerError(
      `${what}: expected tag 0x${tag.toString(16)}, got 0x${node.tag.toString(16)}`,
    );
  }
  return node;
}

export function decodeOid(node: DerNode): string {
  expectTag(node, TAG_OID, "OID");
  const body = node.body;
  if (body.length === 0) {
    throw new DerError("empty OID");
  }
  const first = body[0]!;
  const parts: number[] = [Math.min(2, Math.floor(first / 40)), 0];
  parts[1] = first - parts[0]! * 40;
  let value = 0;
  for (let i = 1; i < body.length; i++) {
    value = value * 128 + (body[i]! & 0x7f);
    if (!(body[i]! & 0x80)) {
      parts.push(value);
      value = 0;
    }
  }
  return parts.join(".");
}

export function decodeInteger(node: DerNode): bigint {
  expectTag(node, TAG_INTEGER, "INTEGER");
  let value = 0n;
  for (const byte of node.body) {
    value = (value << 8n) | BigInt(byte);
  }
  return value;
}
