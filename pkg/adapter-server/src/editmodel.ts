/**
 * Seeded paraphrase edit model with exact force-decoding.
 *
 * A proposal walks the source left to right: before each source token (and
 * once at the end) it may insert tokens geometrically; each source token is
 * then kept, substituted through a weighted lexicon, or deleted. Token
 * emissions mix the lexicon with an open-vocabulary character model, so
 * every whitespace-free token has positive probability and any (src, tgt)
 * pair force-decodes to a finite log-probability.
 *
 * score() sums over all edit alignments with a log-space forward DP, and
 * propose() reports its candidate's probability through the same DP, so a
 * candidate's logq_forward always equals a later score(src, candidate).
 */

import { Rng } from "./rng";

const ASCII_LO = 33;
const ASCII_HI = 126; // printable, space excluded
const ASCII_COUNT = ASCII_HI - ASCII_LO + 1; // 94

// code points JavaScript's /\s/u matches, all excluded from tokens
const WHITESPACE_CODEPOINTS = new Set<number>([
  0x09, 0x0a, 0x0b, 0x0c, 0x0d, 0x20, 0xa0, 0x1680,
  0x2000, 0x2001, 0x2002, 0x2003, 0x2004, 0x2005, 0x2006, 0x2007,
  0x2008, 0x2009, 0x200a, 0x2028, 0x2029, 0x202f, 0x205f, 0x3000, 0xfeff,
]);
const SURROGATE_COUNT = 0xe000 - 0xd800; // 2048
const VALID_CODEPOINTS =
  0x110000 - SURROGATE_COUNT - WHITESPACE_CODEPOINTS.size;

const TEMPERATURE_FLOOR = 0.05;

export class UnscoreableTokenError extends Error {}

export interface LexiconEntry {
  token: string;
  weight: number;
}

export interface Lexicon {
  subs: Map<string, LexiconEntry[]>;
  pool: LexiconEntry[];
}

export function parseLexicon(obj: unknown): Lexicon {
  const subs = new Map<string, LexiconEntry[]>();
  let pool: LexiconEntry[] = [];
  if (obj !== null && typeof obj === "object") {
    const raw = obj as { subs?: Record<string, [string, number][]>; pool?: [string, number][] };
    for (const [token, entries] of Object.entries(raw.subs ?? {})) {
      subs.set(token, entries.map(([t, w]) => checkEntry(t, w)));
    }
    pool = (raw.pool ?? []).map(([t, w]) => checkEntry(t, w));
  }
  return { subs, pool };
}

function checkEntry(token: string, weight: number): LexiconEntry {
  if (!Number.isFinite(weight) || weight <= 0) {
    throw new Error(`lexicon weight for ${JSON.stringify(token)} must be > 0`);
  }
  if (/\s/u.test(token) || token.length === 0) {
    throw new Error(`lexicon token ${JSON.stringify(token)} must be non-empty and whitespace-free`);
  }
  return { token, weight };
}

export interface EditParams {
  pIns: number; // insertion continuation probability per slot, in (0, 0.5)
  pKeep: number;
  pSub: number;
  pDel: number;
  lambdaChar: number; // character-model share of token emissions, in (0, 1]
  pMore: number; // character continuation probability, in (0, 1)
  muUnicode: number; // full-unicode share of the character mixture, in (0, 1)
}

export const DEFAULT_EDIT_PARAMS: EditParams = {
  pIns: 0.06,
  pKeep: 0.82,
  pSub: 0.1,
  pDel: 0.08,
  lambdaChar: 0.02,
  pMore: 0.7,
  muUnicode: 0.01,
};

function logaddexp(a: number, b: number): number {
  if (a === -Infinity) return b;
  if (b === -Infinity) return a;
  const m = Math.max(a, b);
  return m + Math.log(Math.exp(a - m) + Math.exp(b - m));
}

export class EditModel {
  private readonly params: EditParams;
  private readonly lexicon: Lexicon;
  private readonly temperature: number;
  // temperature-adjusted probabilities used for both sampling and scoring
  private readonly insP: number;
  private readonly keepP: number;
  private readonly subP: number;
  private readonly delP: number;

  constructor(params: EditParams, lexicon: Lexicon, temperature = 1.0) {
    validateParams(params, temperature);
    this.params = params;
    this.lexicon = lexicon;
    this.temperature = temperature;
    const tEff = Math.max(temperature, TEMPERATURE_FLOOR);
    const inv = 1.0 / tEff;
    const insHot = Math.pow(params.pIns, inv);
    const insCold = Math.pow(1 - params.pIns, inv);
    this.insP = insHot / (insHot + insCold);
    const ops = [params.pKeep, params.pSub, params.pDel].map((p) => Math.pow(p, inv));
    const z = ops[0] + ops[1] + ops[2];
    this.keepP = ops[0] / z;
    this.subP = ops[1] / z;
    this.delP = ops[2] / z;
  }

  // ----------------------------------------------------------- char model

  private charLogProb(token: string): number {
    const { muUnicode, pMore } = this.params;
    let logp = 0;
    let count = 0;
    for (const ch of token) {
      const cp = ch.codePointAt(0)!;
      if (cp >= 0xd800 && cp < 0xe000) {
        throw new UnscoreableTokenError("token contains a lone surrogate");
      }
      if (WHITESPACE_CODEPOINTS.has(cp)) {
        throw new UnscoreableTokenError("token contains whitespace");
      }
      let p = muUnicode / VALID_CODEPOINTS;
      if (cp >= ASCII_LO && cp <= ASCII_HI) p += (1 - muUnicode) / ASCII_COUNT;
      logp += Math.log(p);
      count += 1;
    }
    if (count === 0) throw new UnscoreableTokenError("empty token");
    return logp + (count - 1) * Math.log(pMore) + Math.log(1 - pMore);
  }

  private sampleCharToken(rng: Rng): string {
    const { muUnicode, pMore } = this.params;
    const chars: string[] = [];
    do {
      if (rng.next() < muUnicode) {
        // uniform over valid code points by rejection
        for (;;) {
          const cp = rng.int(0x110000);
          if (cp >= 0xd800 && cp < 0xe000) continue;
          if (WHITESPACE_CODEPOINTS.has(cp)) continue;
          chars.push(String.fromCodePoint(cp));
          break;
        }
      } else {
        chars.push(String.fromCodePoint(ASCII_LO + rng.int(ASCII_COUNT)));
      }
    } while (rng.next() < pMore);
    return chars.join("");
  }

  // ------------------------------------------------------ token emissions

  private subLogProb(target: string, source: string): number {
    const row = this.lexicon.subs.get(source);
    const charPart = this.charLogProb(target);
    if (!row) return charPart;
    const total = row.reduce((acc, e) => acc + e.weight, 0);
    const hit = row.find((e) => e.token === target);
    const lex = hit ? hit.weight / total : 0;
    const { lambdaChar } = this.params;
    return Math.log((1 - lambdaChar) * lex + lambdaChar * Math.exp(charPart));
  }

  private sampleSub(source: string, rng: Rng): string {
    const row = this.lexicon.subs.get(source);
    if (!row || rng.next() < this.params.lambdaChar) return this.sampleCharToken(rng);
    const idx = rng.categorical(row.map((e) => e.weight));
    return row[idx].token;
  }

  private insLogProb(target: string): number {
    const { pool } = this.lexicon;
    const charPart = this.charLogProb(target);
    if (pool.length === 0) return charPart;
    const total = pool.reduce((acc, e) => acc + e.weight, 0);
    const hit = pool.find((e) => e.token === target);
    const lex = hit ? hit.weight / total : 0;
    const { lambdaChar } = this.params;
    return Math.log((1 - lambdaChar) * lex + lambdaChar * Math.exp(charPart));
  }

  private sampleIns(rng: Rng): string {
    const { pool } = this.lexicon;
    if (pool.length === 0 || rng.next() < this.params.lambdaChar) {
      return this.sampleCharToken(rng);
    }
    const idx = rng.categorical(pool.map((e) => e.weight));
    return pool[idx].token;
  }

  // -------------------------------------------------------------- scoring

  /**
   * Exact log q(tgt | src): log-space forward DP over all alignments.
   * Always finite for whitespace-free tokens (full-support mixtures).
   */
  score(src: string[], tgt: string[]): number {
    const n = src.length;
    const m = tgt.length;
    const logIns = Math.log(this.insP);
    const logStay = Math.log(1 - this.insP);
    const logDel = logStay + Math.log(this.delP);
    const insLog = tgt.map((t) => this.insLogProb(t));
    // emit(i, j): consume src[i] while emitting tgt[j] via keep or substitute
    const emitLog = (i: number, j: number): number => {
      const subPart = this.subP * Math.exp(this.subLogProb(tgt[j], src[i]));
      const keepPart = src[i] === tgt[j] ? this.keepP : 0;
      return logStay + Math.log(keepPart + subPart);
    };

    let prev = new Float64Array(m + 1).fill(-Infinity);
    let cur = new Float64Array(m + 1).fill(-Infinity);
    prev[0] = 0;
    for (let j = 1; j <= m; j++) prev[j] = prev[j - 1] + logIns + insLog[j - 1];
    for (let i = 1; i <= n; i++) {
      cur.fill(-Infinity);
      cur[0] = prev[0] + logDel;
      for (let j = 1; j <= m; j++) {
        let v = cur[j - 1] + logIns + insLog[j - 1];
        v = logaddexp(v, prev[j - 1] + emitLog(i - 1, j - 1));
        v = logaddexp(v, prev[j] + logDel);
        cur[j] = v;
      }
      [prev, cur] = [cur, prev];
    }
    const result = prev[m] + logStay;
    if (!Number.isFinite(result)) {
      throw new Error("force-decode produced a non-finite log-probability");
    }
    return result;
  }

  // ------------------------------------------------------------- sampling

  /**
   * Draw one candidate. At temperature 0 decoding is greedy, which under
   * the validated parameters is the identity edit; reported probabilities
   * always come from the floored-temperature distribution via score().
   */
  propose(src: string[], rng: Rng): { tokens: string[]; logqForward: number } {
    let tokens: string[];
    if (this.temperature === 0) {
      tokens = src.slice();
    } else {
      tokens = [];
      for (let i = 0; i <= src.length; i++) {
        while (rng.next() < this.insP) tokens.push(this.sampleIns(rng));
        if (i < src.length) {
          const op = this.pick(rng);
          if (op === 0) tokens.push(src[i]);
          else if (op === 1) tokens.push(this.sampleSub(src[i], rng));
          // op 2: delete, emit nothing
        }
      }
    }
    return { tokens, logqForward: this.score(src, tokens) };
  }

  private pick(rng: Rng): number {
    const u = rng.next();
    if (u < this.keepP) return 0;
    if (u < this.keepP + this.subP) return 1;
    return 2;
  }
}

function validateParams(p: EditParams, temperature: number): void {
  if (!(p.pIns > 0 && p.pIns < 0.5)) {
    throw new Error("pIns must lie in (0, 0.5)");
  }
  const opSum = p.pKeep + p.pSub + p.pDel;
  if (Math.abs(opSum - 1) > 1e-9 || p.pKeep <= 0 || p.pSub <= 0 || p.pDel <= 0) {
    throw new Error("pKeep + pSub + pDel must be positive and sum to 1");
  }
  if (!(p.lambdaChar > 0 && p.lambdaChar <= 1)) {
    throw new Error("lambdaChar must lie in (0, 1]");
  }
  if (!(p.pMore > 0 && p.pMore < 1)) {
    throw new Error("pMore must lie in (0, 1)");
  }
  if (!(p.muUnicode > 0 && p.muUnicode < 1)) {
    throw new Error("muUnicode must lie in (0, 1)");
  }
  if (!(temperature >= 0)) {
    throw new Error("temperature must be >= 0");
  }
  if (temperature === 0 && (p.pKeep <= p.pSub || p.pKeep <= p.pDel)) {
    throw new Error("temperature 0 requires pKeep to dominate (greedy = identity)");
  }
}
