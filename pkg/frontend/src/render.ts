/** DOM builders for the console views. Everything renders into a host
 * element that is cleared first, so repeated calls replace the view. */

import type { ImageEntry, JobSummary, KeywordEntry, ScanJob, ScanReport } from "./types.js";

function el<K extends keyof HTMLElementTagNameMap>(
  tag: K,
  className?: string,
  text?: string,
): HTMLElementTagNameMap[K] {
  const node = document.createElement(tag);
  if (className) {
    node.className = className;
  }
  if (text !== undefined) {
    node.textContent = text;
  }
  return node;
}

function clear(host: HTMLElement): void {
  host.replaceChildren();
}

export function percent(x: number): string {
  return `${(x * 100).toFixed(1)}%`;
}

function categoryClass(category: string | null): string {
  return category ? `cat-${category}` : "cat-none";
}

export function renderHealthBanner(
  host: HTMLElement,
  status: "ok" | "loading" | "error",
  detail?: string,
): void {
  clear(host);
  host.dataset.status = status;
  if (status === "ok") {
    host.classList.add("hidden");
    return;
  }
  host.classList.remove("hidden");
  const text =
    status === "loading"
      ? "model loading, submissions are paused"
      : `service unavailable: ${detail ?? "unknown error"}`;
  host.appendChild(el("span", `banner banner--${status}`, text));
}

export function renderJobList(
  host: HTMLElement,
  jobs: JobSummary[],
  onSelect: (id: string) => void,
): void {
  clear(host);
  if (jobs.length === 0) {
    host.appendChild(el("p", "empty", "no scans yet"));
    return;
  }
  const list = el("ul", "job-list");
  for (const job of jobs) {
    const item = el("li", `job-row job-row--${job.state}`);
    item.dataset.jobId = job.id;
    item.appendChild(el("span", "job-url", job.url));
    item.appendChild(el("span", `job-state job-state--${job.state}`, job.state));
    item.appendChild(
      el("span", "job-activity", job.activity ?? (job.error ? "error" : "")),
    );
    item.addEventListener("click", () => onSelect(job.id));
    list.appendChild(item);
  }
  host.appendChild(list);
}

function keywordChip(kw: KeywordEntry): HTMLElement {
  const chip = el("span", `chip ${categoryClass(kw.category)}`);
  chip.appendChild(el("span", "chip-surface", kw.surface));
  chip.appendChild(el("span", "chip-relevance", kw.relevance.toFixed(3)));
  chip.title = kw.category
    ? `${kw.category}, similarity ${kw.similarity.toFixed(3)}`
    : "uncategorized";
  return chip;
}

function imageCard(image: ImageEntry): HTMLElement {
  const card = el("div", "image-card");
  const best = Math.max(...image.scores);
  card.appendChild(el("div", "image-url", image.source_url));
  card.appendChild(
    el("div", `image-top ${categoryClass(image.top)}`,
      `${image.top} ${percent(best)}`),
  );
  card.appendChild(el("div", "image-dhash", image.dhash));
  return card;
}

function titleRow(label: string, category: string | null,
                  confidence: number): HTMLElement {
  const row = el("div", "title-row");
  row.appendChild(el("span", "title-label", label));
  row.appendChild(
    el("span", `title-category ${categoryClass(category)}`,
      category ?? "none"),
  );
  row.appendChild(el("span", "title-confidence", percent(confidence)));
  return row;
}

export function renderReport(host: HTMLElement, report: ScanReport): void {
  clear(host);

  const banner = el("div",
    `activity-banner ${categoryClass(report.activity)}`);
  banner.appendChild(el("span", "activity-name", report.activity ?? "no activity detected"));
  banner.appendChild(el("span", "activity-confidence", percent(report.activity_confidence)));
  banner.appendChild(el("span", "activity-source", `source: ${report.activity_source}`));
  host.appendChild(banner);

  const titles = el("div", "titles");
  titles.appendChild(titleRow("text", report.nlp_title.category,
    report.nlp_title.confidence));
  titles.appendChild(titleRow("images", report.classification_title.category,
    report.classification_title.confidence));
  host.appendChild(titles);

  const keywords = report.nlp_title.keywords;
  if (keywords.length > 0) {
    const box = el("div", "keywords");
    for (const kw of keywords) {
      box.appendChild(keywordChip(kw));
    }
    host.appendChild(box);
  }

  if (report.images.length > 0) {
    const grid = el("div", "image-grid");
    for (const image of report.images) {
      grid.appendChild(imageCard(image));
    }
    host.appendChild(grid);
  }
}

export function renderJobDetail(host: HTMLElement, job: ScanJob): void {
  clear(host);
  const head = el("div", "detail-head");
  head.appendChild(el("span", "detail-url", job.url));
  head.appendChild(el("span", `job-state job-state--${job.state}`, job.state));
  host.appendChild(head);

  if (job.state === "failed") {
    host.appendChild(el("p", "detail-error", job.error ?? "scan failed"));
    return;
  }
  if (job.state !== "done" || job.report === null) {
    host.appendChild(el("p", "detail-progress", `scan in progress: ${job.state}`));
    return;
  }
  const body = el("div", "detail-report");
  renderReport(body, job.report);
  host.appendChild(body);
}

export function renderUnknownJob(host: HTMLElement, id: string): void {
  clear(host);
  host.appendChild(el("p", "detail-error", `no such scan "${id}"`));
}
