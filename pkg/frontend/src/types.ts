/** Shapes returned by the scan service. */

export interface KeywordEntry {
  surface: string;
  relevance: number;
  similarity: number;
  category: string | null;
}

export interface ImageEntry {
  source_url: string;
  top: string;
  scores: number[];
  dhash: string;
}

export interface TitleBlock {
  category: string | null;
  confidence: number;
}

export interface ScanReport {
  url: string;
  activity: string | null;
  activity_confidence: number;
  activity_source: string;
  classification_title: TitleBlock;
  nlp_title: TitleBlock & { keywords: KeywordEntry[] };
  images: ImageEntry[];
  stats: Record<string, unknown>;
}

export interface ScanJob {
  id: string;
  url: string;
  state: string;
  submitted_at: string;
  finished_at: string | null;
  report: ScanReport | null;
  error: string | null;
}

export interface JobSummary {
  id: string;
  url: string;
  state: string;
  submitted_at: string;
  finished_at: string | null;
  activity: string | null;
  error: string | null;
}

export interface JobList {
  total: number;
  offset: number;
  limit: number;
  jobs: JobSummary[];
}

export const TERMINAL_STATES = new Set(["done", "failed"]);

export const CLASS_ORDER = [
  "drugs",
  "weapons",
  "bank_cards",
  "identity_documents",
  "illegal_currencies",
] as const;
