/**
 * Extraction jobs: run an encoder over every sentence of a dataset file and
 * emit the EMB1 store, plus a verifier for finished stores.
 */

import { readDatasetSentences } from "./dataset.js";
import {
  EmbeddingStore,
  getRow,
  readStore,
  writeStore,
} from "./format.js";
import { SentenceEncoder } from "./encoder.js";

export interface ExtractionJob {
  dataPath: string;
  outPath: string;
  batchSize?: number;
  log?: (msg: string) => void;
}

export interface ExtractionSummary {
  count: number;
  dim: number;
  truncated: string[];
}

/**
 * One vector per sentence id, in dataset order. Duplicate texts are
 * encoded once and shared, so repeated sentences get bit-identical rows;
 * re-running the job rewrites the same bytes.
 */
export async function extract(
  job: ExtractionJob,
  encoder: SentenceEncoder,
): Promise<ExtractionSummary> {
  const log = job.log ?? (() => {});
  const batchSize = job.batchSize ?? 32;
  const sentences = readDatasetSentences(job.dataPath);

  const uniqueTexts: string[] = [];
  const textRow = new Map<string, number>();
  for (const s of sentences) {
    if (!textRow.has(s.text)) {
      textRow.set(s.text, uniqueTexts.length);
      uniqueTexts.push(s.text);
    }
  }

  const dim = encoder.dim;
  const byText: Float32Array[] = [];
  const truncatedTexts = new Set<string>();
  for (let start = 0; start < uniqueTexts.length; start += batchSize) {
    const chunk = uniqueTexts.slice(start, start + batchSize);
    const result = await encoder.encode(chunk);
    result.vectors.forEach((v, i) => {
      if (v.length !== dim) {
        throw new Error(`encoder returned dim ${v.length}, expected ${dim}`);
      }
      byText.push(v);
      if (result.truncated[i]) truncatedTexts.add(chunk[i]);
    });
  }

  const vectors = new Float32Array(sentences.length * dim);
  const ids = sentences.map((s) => s.id);
  sentences.forEach((s, row) => {
    vectors.set(byText[textRow.get(s.text)!], row * dim);
  });

  const truncated = sentences
    .filter((s) => truncatedTexts.has(s.text))
    .map((s) => s.id);
  for (const id of truncated) {
    log(`warning: ${id} truncated at the model max length`);
  }

  const store: EmbeddingStore = { dim, ids, vectors };
  writeStore(job.outPath, store);
  log(`wrote ${ids.length} vectors of dim ${dim} to ${job.outPath}`);
  return { count: ids.length, dim, truncated };
}

export interface VerifyReport {
  ok: boolean;
  covered: number;
  missing: string[];
  nonFiniteRows: string[];
  dim: number;
}

/** Check that a store covers a dataset: every sentence id present, every
 * row finite. Missing ids are listed exhaustively. */
export function verifyStore(storePath: string, dataPath: string): VerifyReport {
  const store = readStore(storePath);
  const rowOf = new Map(store.ids.map((id, row) => [id, row]));
  const sentences = readDatasetSentences(dataPath);

  const missing: string[] = [];
  const nonFiniteRows: string[] = [];
  for (const s of sentences) {
    const row = rowOf.get(s.id);
    if (row === undefined) {
      missing.push(s.id);
      continue;
    }
    const vec = getRow(store, row);
    for (let i = 0; i < vec.length; i++) {
      if (!Number.isFinite(vec[i])) {
        nonFiniteRows.push(s.id);
        break;
      }
    }
  }
  return {
    ok: missing.length === 0 && nonFiniteRows.length === 0,
    covered: sentences.length - missing.length,
    missing,
    nonFiniteRows,
    dim: store.dim,
  };
}
