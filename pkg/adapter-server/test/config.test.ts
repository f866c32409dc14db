import assert from "node:assert/strict";
import { test } from "node:test";

import { buildConfig, renderPrompt, DEFAULT_TEMPLATE, SENTENCE_PLACEHOLDER }
  from "../src/config";

test("default template carries exactly one placeholder", () => {
  const occurrences = DEFAULT_TEMPLATE.split(SENTENCE_PLACEHOLDER).length - 1;
  assert.equal(occurrences, 1);
  const rendered = renderPrompt(DEFAULT_TEMPLATE, "how art thou");
  assert.ok(rendered.includes("how art thou"));
  assert.ok(!rendered.includes(SENTENCE_PLACEHOLDER));
});

test("template without placeholder is rejected", () => {
  assert.throws(
    () => buildConfig({ prompt_template: "Rewrite this." }, process.cwd()),
    /exactly one/);
});

test("template with two placeholders is rejected", () => {
  assert.throws(
    () => buildConfig({
      prompt_template: "{sentence} and {sentence} again",
    }, process.cwd()),
    /exactly one/);
});

test("defaults produce a working config", () => {
  const cfg = buildConfig({}, process.cwd());
  assert.equal(cfg.model, "builtin-edit-v1");
  assert.equal(cfg.temperature, 1.0);
  assert.equal(cfg.maxInflight, 4);
  assert.equal(cfg.energyTerms.size, 0);
});

test("non-numeric knobs are rejected", () => {
  assert.throws(() => buildConfig({ temperature: "hot" }, process.cwd()));
});

test("inline lexicon object is accepted", () => {
  const cfg = buildConfig({
    edit: { lexicon: { subs: { you: [["thou", 1.0]] }, pool: [] } },
  }, process.cwd());
  assert.ok(cfg.lexicon.subs.has("you"));
});
