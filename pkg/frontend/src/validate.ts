/**
 * Client-side scan target validation, mirroring the server's rule:
 * http or https scheme, a host present, and the host under .onion.
 * Anything that fails here is rejected before a request is made.
 */

export interface ValidationResult {
  ok: boolean;
  error: string | null;
}

export function validateOnionUrl(raw: string): ValidationResult {
  const trimmed = raw.trim();
  if (!trimmed) {
    return { ok: false, error: "enter a URL to scan" };
  }

  let parsed: URL;
  try {
    parsed = new URL(trimmed);
  } catch {
    return { ok: false, error: "not a valid URL" };
  }

  const scheme = parsed.protocol.replace(/:$/, "").toLowerCase();
  if (scheme !== "http" && scheme !== "https") {
    return { ok: false, error: `unsupported scheme "${scheme}"` };
  }
  const host = parsed.hostname.toLowerCase();
  if (!host) {
    return { ok: false, error: "no host in URL" };
  }
  if (!host.endsWith(".onion")) {
    return { ok: false, error: `"${host}" is not a .onion host` };
  }
  return { ok: true, error: null };
}
