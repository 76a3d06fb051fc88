import { getScan, type Fetcher } from "./api.js";
import { TERMINAL_STATES, type ScanJob } from "./types.js";

export interface PollOptions {
  intervalMs?: number;
  fetcher?: Fetcher;
  /** Called with every state observed, including the terminal one. */
  onUpdate?: (job: ScanJob) => void;
}

function delay(ms: number): Promise<void> {
  return new Promise((resolve) => {
    setTimeout(resolve, ms);
  });
}

/**
 * Poll a scan job until it reaches done or failed; resolves with the
 * terminal job either way. Transport errors reject.
 */
export async function pollScan(
  id: string,
  options: PollOptions = {},
): Promise<ScanJob> {
  const intervalMs = options.intervalMs ?? 1000;
  for (;;) {
    const job = await getScan(id, options.fetcher);
    options.onUpdate?.(job);
    if (TERMINAL_STATES.has(job.state)) {
      return job;
    }
    await delay(intervalMs);
  }
}
