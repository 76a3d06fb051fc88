import { ApiError, getHealth, getScan, listScans, submitScan, type Fetcher } from "./api.js";
import { pollScan } from "./poll.js";
import { renderHealthBanner, renderJobDetail, renderJobList, renderUnknownJob } from "./render.js";
import { validateOnionUrl } from "./validate.js";

export interface AppOptions {
  fetcher?: Fetcher;
  pollIntervalMs?: number;
  healthIntervalMs?: number;
}

interface Elements {
  form: HTMLFormElement;
  input: HTMLInputElement;
  submit: HTMLButtonElement;
  formError: HTMLElement;
  healthBanner: HTMLElement;
  jobList: HTMLElement;
  detail: HTMLElement;
}

function lookup(): Elements {
  const get = (id: string): HTMLElement => {
    const node = document.getElementById(id);
    if (!node) {
      throw new Error(`missing element #${id}`);
    }
    return node;
  };
  return {
    form: get("scan-form") as HTMLFormElement,
    input: get("scan-url") as HTMLInputElement,
    submit: get("scan-submit") as HTMLButtonElement,
    formError: get("form-error"),
    healthBanner: get("health-banner"),
    jobList: get("job-list"),
    detail: get("detail"),
  };
}

export function init(options: AppOptions = {}): void {
  const fetcher = options.fetcher ?? fetch.bind(globalThis);
  const pollIntervalMs = options.pollIntervalMs ?? 1000;
  const healthIntervalMs = options.healthIntervalMs ?? 2000;
  const els = lookup();

  const refreshList = async (): Promise<void> => {
    try {
      const page = await listScans(fetcher);
      renderJobList(els.jobList, page.jobs, (id) => {
        void showJob(id);
      });
    } catch {
      // the list is only a convenience; leave the previous content
    }
  };

  const showJob = async (id: string): Promise<void> => {
    try {
      renderJobDetail(els.detail, await getScan(id, fetcher));
    } catch (err) {
      if (err instanceof ApiError && err.status === 404) {
        renderUnknownJob(els.detail, id);
        return;
      }
      throw err;
    }
  };

  const watchHealth = async (): Promise<void> => {
    for (;;) {
      try {
        await getHealth(fetcher);
        renderHealthBanner(els.healthBanner, "ok");
        els.submit.disabled = false;
        return;
      } catch (err) {
        if (err instanceof ApiError && err.status === 503) {
          renderHealthBanner(els.healthBanner, "loading");
        } else {
          const detail = err instanceof Error ? err.message : String(err);
          renderHealthBanner(els.healthBanner, "error", detail);
        }
        els.submit.disabled = true;
      }
      await new Promise((resolve) => {
        setTimeout(resolve, healthIntervalMs);
      });
    }
  };

  els.form.addEventListener("submit", (event) => {
    event.preventDefault();
    const verdict = validateOnionUrl(els.input.value);
    if (!verdict.ok) {
      els.formError.textContent = verdict.error;
      return;
    }
    els.formError.textContent = "";
    void (async () => {
      try {
        const created = await submitScan(els.input.value.trim(), fetcher);
        await refreshList();
        const job = await pollScan(created.id, {
          intervalMs: pollIntervalMs,
          fetcher,
          onUpdate: (update) => renderJobDetail(els.detail, update),
        });
        renderJobDetail(els.detail, job);
        await refreshList();
      } catch (err) {
        if (err instanceof ApiError && err.status === 503) {
          renderHealthBanner(els.healthBanner, "loading");
          void watchHealth();
          return;
        }
        els.formError.textContent =
          err instanceof Error ? err.message : String(err);
      }
    })();
  });

  void watchHealth();
  void refreshList();
}
