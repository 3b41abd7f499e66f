/** Input sandbox packing: plain ustar plus gzip, built in the page.
 *
 * The gateway re-validates every member path on arrival; the checks here
 * only catch obvious mistakes before any upload happens.
 */

export class SandboxPathError extends Error {}

export interface SandboxFile {
  name: string;
  bytes: Uint8Array;
}

const BLOCK = 512;

function checkRelativePath(name: string): void {
  if (!name) {
    throw new SandboxPathError("empty file name");
  }
  if (name.startsWith("/") || name.includes("\\")) {
    throw new SandboxPathError(`not a relative path: ${name}`);
  }
  for (const part of name.split("/")) {
    if (part === "" || part === "." || part === "..") {
      throw new SandboxPathError(`path ${name} does not stay inside the sandbox`);
    }
  }
}

function octal(value: number, width: number): Uint8Array {
  const text = value.toString(8).padStart(width - 1, "0") + "\0";
  return new TextEncoder().encode(text);
}

function tarHeader(nameBytes: Uint8Array, size: number, mtime: number): Uint8Array {
  const header = new Uint8Array(BLOCK);
  header.set(nameBytes, 0);
  header.set(octal(0o644, 8), 100); // mode
  header.set(octal(0, 8), 108); // uid
  header.set(octal(0, 8), 116); // gid
  header.set(octal(size, 12), 124);
  header.set(octal(mtime, 12), 136);
  header.fill(0x20, 148, 156); // checksum area counts as spaces
  header[156] = 0x30; // regular file
  header.set(new TextEncoder().encode("ustar\0"), 257);
  header.set(new TextEncoder().encode("00"), 263);
  let sum = 0;
  for (const byte of header) {
    sum += byte;
  }
  const checksum = new TextEncoder().encode(sum.toString(8).padStart(6, "0") + "\0 ");
  header.set(checksum, 148);
  return header;
}

function buildTar(files: SandboxFile[]): Uint8Array {
  const encoder = new TextEncoder();
  const parts: Uint8Array[] = [];
  const mtime = Math.floor(Date.now() / 1000);
  for (const file of files) {
    checkRelativePath(file.name);
    const nameBytes = encoder.encode(file.name);
    if (nameBytes.length > 100) {
      throw new SandboxPathError(`file name longer than 100 bytes: ${file.name}`);
    }
    parts.push(tarHeader(nameBytes, file.bytes.length, mtime));
    parts.push(file.bytes);
    const tail = file.bytes.length % BLOCK;
    if (tail) {
      parts.push(new Uint8Array(BLOCK - tail));
    }
  }
  parts.push(new Uint8Array(2 * BLOCK));
  const total = parts.reduce((n, p) => n + p.length, 0);
  const out = new Uint8Array(total);
  let at = 0;
  for (const part of parts) {
    out.set(part, at);
    at += part.length;
  }
  return out;
}

/** Pack files into the gzipped tar the gateway expects as a job sandbox. */
export async function packSandbox(files: SandboxFile[]): Promise<Uint8Array> {
  const tar = buildTar(files);
  const stream = new Blob([tar.slice().buffer as ArrayBuffer])
    .stream()
    .pipeThrough(new CompressionStream("gzip"));
  return new Uint8Array(await new Response(stream).arrayBuffer());
}
