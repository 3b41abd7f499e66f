import { describe, expect, it } from "vitest";

import { pemToDer } from "../dist/pem.js";
import {
  importPkcs8SigningKey,
  modulusFromSpki,
  parseCertificate,
  parseCsr,
  signProxyCertificate,
  SubjectMismatchError,
} from "../dist/x509.js";
import { python, pythonJson } from "./helpers.js";

interface SigningFixture {
  caPem: string;
  userCertPem: string;
  userKeyPem: string;
  csrPem: string;
  proxyKeyPem: string;
}

function makeFixture(seed: number, cn = "Browser Signer"): SigningFixture {
  return pythonJson<SigningFixture>(`
import json, sys
from cryptography.hazmat.primitives import serialization
from gridgate.certs import TestCa, build_proxy_csr, generate_keypair

ca = TestCa.generate(seed=${seed})
user = ca.issue_user("/C=IT/O=Web Tests/CN=${cn}")
proxy_keys = generate_keypair(2048)
csr = build_proxy_csr(user.subject, proxy_keys)

def key_pem(key):
    return key.private_bytes(
        serialization.Encoding.PEM,
        serialization.PrivateFormat.PKCS8,
        serialization.NoEncryption(),
    ).decode()

json.dump({
    "caPem": ca.certificate.pem(),
    "userCertPem": user.certificate.pem(),
    "userKeyPem": key_pem(user.private_key),
    "csrPem": csr.pem(),
    "proxyKeyPem": key_pem(proxy_keys.private_key),
}, sys.stdout)
`);
}

interface Verdict {
  valid: boolean;
  failures: string[];
  openssl: string;
  opensslOk: boolean;
}

function verifyWithGateway(fixture: SigningFixture, proxyPem: string): Verdict {
  return pythonJson<Verdict>(
    `
import json, sys
from cryptography.hazmat.primitives import serialization
from gridgate.certs import Certificate, assemble_proxy_bundle, validate_proxy_chain

ca = Certificate.from_pem(${JSON.stringify(fixture.caPem)})
user_cert = Certificate.from_pem(${JSON.stringify(fixture.userCertPem)})
proxy_key = serialization.load_pem_private_key(${JSON.stringify(fixture.proxyKeyPem)}.encode(), password=None)
proxy_cert = Certificate.from_pem(sys.stdin.buffer.read())
bundle = assemble_proxy_bundle(proxy_cert, proxy_key, user_cert)
report = validate_proxy_chain(bundle, [ca])

sys.path.insert(0, ${JSON.stringify(process.cwd() + "/..")})
from tests.oracles import openssl_verify_bundle
ok, detail = openssl_verify_bundle(bundle, [ca])
json.dump({
    "valid": report.valid,
    "failures": [f.code for f in report.failures],
    "openssl": detail,
    "opensslOk": ok,
}, sys.stdout)
`,
    new TextEncoder().encode(proxyPem),
  );
}

describe("in-browser proxy signing", () => {
  it("produces a chain both the gateway validator and openssl accept", async () => {
    const fixture = makeFixture(41);
    const issuerCert = parseCertificate(fixture.userCertPem);
    const signingKey = await importPkcs8SigningKey(pemToDer(fixture.userKeyPem, "PRIVATE KEY"));
    const proxyPem = await signProxyCertificate({
      csrPem: fixture.csrPem,
      issuerCert,
      signingKey,
      lifetimeSeconds: 6 * 3600,
    });

    const parsed = parseCertificate(proxyPem);
    expect(parsed.subject.text).toBe(`${issuerCert.subject.text}/CN=${parsed.serial.toString()}`);
    expect(parsed.notAfter.getTime()).toBeLessThanOrEqual(issuerCert.notAfter.getTime());

    const verdict = verifyWithGateway(fixture, proxyPem);
    expect(verdict.failures).toEqual([]);
    expect(verdict.valid).toBe(true);
    expect(verdict.opensslOk, verdict.openssl).toBe(true);
  });

  it("clamps the proxy expiry to the issuer window", async () => {
    const fixture = makeFixture(42);
    const issuerCert = parseCertificate(fixture.userCertPem);
    const signingKey = await importPkcs8SigningKey(pemToDer(fixture.userKeyPem, "PRIVATE KEY"));
    const proxyPem = await signProxyCertificate({
      csrPem: fixture.csrPem,
      issuerCert,
      signingKey,
      lifetimeSeconds: 500 * 365 * 24 * 3600,
    });
    const parsed = parseCertificate(proxyPem);
    expect(parsed.notAfter.getTime()).toBe(issuerCert.notAfter.getTime());
    const verdict = verifyWithGateway(fixture, proxyPem);
    expect(verdict.valid).toBe(true);
  });

  it("refuses to sign a request for a different identity", async () => {
    const fixture = makeFixture(43);
    const stranger = makeFixture(44, "Somebody Else");
    const issuerCert = parseCertificate(stranger.userCertPem);
    const signingKey = await importPkcs8SigningKey(pemToDer(stranger.userKeyPem, "PRIVATE KEY"));
    await expect(
      signProxyCertificate({
        csrPem: fixture.csrPem,
        issuerCert,
        signingKey,
        lifetimeSeconds: 3600,
      }),
    ).rejects.toBeInstanceOf(SubjectMismatchError);
  });

  it("refuses a key that does not match the certificate", async () => {
    const fixture = makeFixture(45);
    const issuerCert = parseCertificate(fixture.userCertPem);
    const wrongKey = await importPkcs8SigningKey(pemToDer(fixture.proxyKeyPem, "PRIVATE KEY"));
    await expect(
      signProxyCertificate({
        csrPem: fixture.csrPem,
        issuerCert,
        signingKey: wrongKey,
        lifetimeSeconds: 3600,
      }),
    ).rejects.toBeInstanceOf(SubjectMismatchError);
  });

  it("parses certificate requests", () => {
    const fixture = makeFixture(46);
    const csr = parseCsr(fixture.csrPem);
    expect(csr.subject.text).toBe("/C=IT/O=Web Tests/CN=Browser Signer");
    const oracle = python(`
import sys
from cryptography import x509
csr = x509.load_pem_x509_csr(${JSON.stringify(fixture.csrPem)}.encode())
sys.stdout.write(format(csr.public_key().public_numbers().n, "x"))
`).toString();
    const modulus = Buffer.from(modulusFromSpki(csr.spki)).toString("hex").replace(/^0+/, "");
    expect(modulus).toBe(oracle);
  });
});
