/** Server configuration: model identity, prompt template, decoding knobs. */

import * as fs from "node:fs";
import * as path from "node:path";

import { DEFAULT_EDIT_PARAMS, EditParams, Lexicon, parseLexicon } from "./editmodel";
import { Classifier, ClassifierFile } from "./classifier";

export const SENTENCE_PLACEHOLDER = "{sentence}";

export interface EnergyTermConfig {
  classifier: Classifier;
  targetLabel: string;
}

export interface ServerConfig {
  model: string;
  promptTemplate: string;
  temperature: number;
  maxLen: number; // input size cap in tokens; larger requests are rejected
  device: string;
  seed: number;
  maxInflight: number;
  edit: EditParams;
  lexicon: Lexicon;
  energyTerms: Map<string, EnergyTermConfig>;
}

export const DEFAULT_TEMPLATE =
  '"There is still a stain on your cheek from an old tear."\n' +
  "Rewrite this sentence in the target style.\n\n" +
  "Upon thy cheek the stain of an old tear doth linger still.\n-----\n" +
  `"${SENTENCE_PLACEHOLDER}"\nRewrite this sentence in the target style.`;

function countPlaceholders(template: string): number {
  return template.split(SENTENCE_PLACEHOLDER).length - 1;
}

export function renderPrompt(template: string, sentence: string): string {
  return template.replace(SENTENCE_PLACEHOLDER, sentence);
}

/** Build a config from a parsed JSON object; paths resolve against baseDir. */
export function buildConfig(raw: Record<string, unknown>, baseDir: string): ServerConfig {
  const template = typeof raw.prompt_template === "string"
    ? raw.prompt_template
    : DEFAULT_TEMPLATE;
  if (countPlaceholders(template) !== 1) {
    throw new Error(
      `prompt_template must contain exactly one ${SENTENCE_PLACEHOLDER} placeholder`);
  }

  const editRaw = (raw.edit ?? {}) as Record<string, unknown>;
  const edit: EditParams = {
    pIns: num(editRaw.p_ins, DEFAULT_EDIT_PARAMS.pIns),
    pKeep: num(editRaw.p_keep, DEFAULT_EDIT_PARAMS.pKeep),
    pSub: num(editRaw.p_sub, DEFAULT_EDIT_PARAMS.pSub),
    pDel: num(editRaw.p_del, DEFAULT_EDIT_PARAMS.pDel),
    lambdaChar: num(editRaw.lambda_char, DEFAULT_EDIT_PARAMS.lambdaChar),
    pMore: num(editRaw.p_more, DEFAULT_EDIT_PARAMS.pMore),
    muUnicode: num(editRaw.mu_unicode, DEFAULT_EDIT_PARAMS.muUnicode),
  };

  let lexicon: Lexicon = { subs: new Map(), pool: [] };
  if (typeof editRaw.lexicon === "string") {
    const p = path.resolve(baseDir, editRaw.lexicon);
    lexicon = parseLexicon(JSON.parse(fs.readFileSync(p, "utf-8")));
  } else if (editRaw.lexicon && typeof editRaw.lexicon === "object") {
    lexicon = parseLexicon(editRaw.lexicon);
  }

  const energyTerms = new Map<string, EnergyTermConfig>();
  const termsRaw = (raw.energy_terms ?? {}) as Record<
    string, { classifier: string; target_label: string }>;
  for (const [name, t] of Object.entries(termsRaw)) {
    const file = JSON.parse(
      fs.readFileSync(path.resolve(baseDir, t.classifier), "utf-8"),
    ) as ClassifierFile;
    const clf = new Classifier(file);
    if (!clf.hasLabel(t.target_label)) {
      throw new Error(`energy term '${name}': unknown label '${t.target_label}'`);
    }
    energyTerms.set(name, { classifier: clf, targetLabel: t.target_label });
  }

  return {
    model: typeof raw.model === "string" ? raw.model : "builtin-edit-v1",
    promptTemplate: template,
    temperature: num(raw.temperature, 1.0),
    maxLen: num(raw.max_len, 2000),
    device: typeof raw.device === "string" ? raw.device : "cpu",
    seed: num(raw.seed, 12345),
    maxInflight: num(raw.max_inflight, 4),
    edit,
    lexicon,
    energyTerms,
  };
}

export function loadConfig(configPath: string): ServerConfig {
  const raw = JSON.parse(fs.readFileSync(configPath, "utf-8"));
  return buildConfig(raw, path.dirname(path.resolve(configPath)));
}

function num(v: unknown, dflt: number): number {
  if (v === undefined || v === null) return dflt;
  if (typeof v !== "number" || !Number.isFinite(v)) {
    throw new Error(`expected a finite number, got ${JSON.stringify(v)}`);
  }
  return v;
}
