/**
 * Naive Bayes posterior scorer over the sampler's classifier file format:
 * {"labels", "priors", "smoothing", "lowercase", "unigram_logp",
 *  "bigram_logp"} with per-class log-probability tables carrying an
 * "<oov>" bucket. Serves the protocol's energy op as -log p(label | text).
 */

import { tokenize } from "./tokenize";

const OOV = "<oov>";

type Table = Record<string, number>;

export interface ClassifierFile {
  labels: string[];
  priors: Record<string, number>;
  lowercase?: boolean;
  unigram_logp: Record<string, Table>;
  bigram_logp?: Record<string, Table> | null;
}

export class Classifier {
  private readonly labels: string[];
  private readonly priors: Record<string, number>;
  private readonly lowercase: boolean;
  private readonly unigram: Record<string, Table>;
  private readonly bigram: Record<string, Table> | null;

  constructor(file: ClassifierFile) {
    if (!Array.isArray(file.labels) || file.labels.length !== 2) {
      throw new Error("classifier file needs exactly two labels");
    }
    this.labels = file.labels;
    this.priors = file.priors;
    this.lowercase = Boolean(file.lowercase);
    this.unigram = file.unigram_logp;
    this.bigram = file.bigram_logp ?? null;
    for (const label of this.labels) {
      if (!(label in this.unigram) || !(OOV in this.unigram[label])) {
        throw new Error(`unigram table for '${label}' is missing or lacks ${OOV}`);
      }
      if (this.bigram && !(OOV in this.bigram[label])) {
        throw new Error(`bigram table for '${label}' lacks ${OOV}`);
      }
    }
  }

  hasLabel(label: string): boolean {
    return this.labels.includes(label);
  }

  private logScore(tokens: string[], label: string): number {
    const uni = this.unigram[label];
    let score = Math.log(this.priors[label]);
    for (const t of tokens) score += uni[t] ?? uni[OOV];
    if (this.bigram) {
      const bi = this.bigram[label];
      for (let i = 0; i + 1 < tokens.length; i++) {
        const key = `${tokens[i]} ${tokens[i + 1]}`;
        score += bi[key] ?? bi[OOV];
      }
    }
    return score;
  }

  posterior(text: string, label: string): number {
    if (!this.hasLabel(label)) throw new Error(`unknown label '${label}'`);
    const tokens = tokenize(text, this.lowercase);
    const scores = this.labels.map((lb) => this.logScore(tokens, lb));
    const m = Math.max(...scores);
    const z = scores.reduce((acc, s) => acc + Math.exp(s - m), 0);
    return Math.exp(scores[this.labels.indexOf(label)] - m) / z;
  }

  /** -log p(label | text); finite because posteriors are interior. */
  energy(text: string, label: string): number {
    return -Math.log(this.posterior(text, label));
  }
}
