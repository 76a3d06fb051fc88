import type { JobList, ScanJob } from "./types.js";

export const API_BASE = "/api/v1";

/** Error carrying the HTTP status so views can branch on 404/503. */
export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.status = status;
  }
}

/** Fetch implementation hook; tests substitute a stub. */
export type Fetcher = typeof fetch;

async function errorDetail(res: Response): Promise<string> {
  try {
    const body = await res.json();
    if (body && typeof body.detail === "string") {
      return body.detail;
    }
  } catch {
    // fall through to the generic message
  }
  return `request failed with status ${res.status}`;
}

async function asJson<T>(res: Response): Promise<T> {
  if (!res.ok) {
    throw new ApiError(res.status, await errorDetail(res));
  }
  return (await res.json()) as T;
}

export async function submitScan(
  url: string,
  fetcher: Fetcher = fetch,
): Promise<{ id: string; state: string }> {
  const res = await fetcher(`${API_BASE}/scans`, {
    method: "POST",
    headers: { "Content-Type": "application/json" },
    body: JSON.stringify({ url }),
  });
  return asJson(res);
}

export async function getScan(
  id: string,
  fetcher: Fetcher = fetch,
): Promise<ScanJob> {
  const res = await fetcher(`${API_BASE}/scans/${encodeURIComponent(id)}`);
  return asJson(res);
}

export async function listScans(
  fetcher: Fetcher = fetch,
  offset = 0,
  limit = 20,
): Promise<JobList> {
  const res = await fetcher(
    `${API_BASE}/scans?offset=${offset}&limit=${limit}`,
  );
  return asJson(res);
}

export async function getHealth(
  fetcher: Fetcher = fetch,
): Promise<{ status: string }> {
  const res = await fetcher(`${API_BASE}/health`);
  return asJson(res);
}
