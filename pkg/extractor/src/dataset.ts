/**
 * Read the sentences of a BLM JSON-Lines dataset file.
 *
 * One instance per line:
 *   {"id", "dataset", "type", "context": [str x7], "answers": [{text, label}]}
 *
 * Sentence ids are derived deterministically as `<id>:ctx:<i>` and
 * `<id>:ans:<j>`, the same rule the training side uses, so stores written
 * here line up with its loader.
 */

import * as fs from "node:fs";

export interface SentenceRef {
  id: string;
  text: string;
}

export class DatasetError extends Error {}

interface RawInstance {
  id: string;
  dataset: string;
  type: string;
  context: string[];
  answers: { text: string; label: string }[];
}

export function readDatasetSentences(dataPath: string): SentenceRef[] {
  const sentences: SentenceRef[] = [];
  const seen = new Set<string>();
  const lines = fs.readFileSync(dataPath, "utf-8").split("\n");
  lines.forEach((line, i) => {
    if (!line.trim()) return;
    let rec: RawInstance;
    try {
      rec = JSON.parse(line) as RawInstance;
    } catch {
      throw new DatasetError(`${dataPath}:${i + 1}: malformed JSON`);
    }
    if (!rec.id || !Array.isArray(rec.context) || !Array.isArray(rec.answers)) {
      throw new DatasetError(`${dataPath}:${i + 1}: missing id/context/answers`);
    }
    if (rec.context.length !== 7) {
      throw new DatasetError(
        `instance ${rec.id}: context length ${rec.context.length} != 7`,
      );
    }
    const nCorrect = rec.answers.filter((a) => a.label === "Correct").length;
    if (nCorrect !== 1) {
      throw new DatasetError(
        `instance ${rec.id}: expected exactly one Correct answer, got ${nCorrect}`,
      );
    }
    if (seen.has(rec.id)) {
      throw new DatasetError(`duplicate instance id ${rec.id}`);
    }
    seen.add(rec.id);
    rec.context.forEach((text, k) => {
      sentences.push({ id: `${rec.id}:ctx:${k}`, text });
    });
    rec.answers.forEach((a, k) => {
      sentences.push({ id: `${rec.id}:ans:${k}`, text: a.text });
    });
  });
  return sentences;
}
