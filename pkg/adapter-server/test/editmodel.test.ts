import assert from "node:assert/strict";
import { test } from "node:test";

import { DEFAULT_EDIT_PARAMS, EditModel, parseLexicon, UnscoreableTokenError }
  from "../src/editmodel";
import { Rng } from "../src/rng";

const lexicon = parseLexicon({
  subs: {
    you: [["thou", 3.0], ["thee", 1.0]],
    are: [["art", 1.0]],
    hello: [["hail", 1.0]],
  },
  pool: [["prithee", 1.0], ["forsooth", 1.0]],
});

function model(temperature = 1.0): EditModel {
  return new EditModel(DEFAULT_EDIT_PARAMS, lexicon, temperature);
}

test("identity force-decode is finite and <= 0", () => {
  const m = model();
  const src = ["you", "are", "here"];
  const logq = m.score(src, src);
  assert.ok(Number.isFinite(logq));
  assert.ok(logq <= 0);
});

test("propose logq_forward equals a subsequent score", () => {
  const m = model();
  const rng = new Rng(31337);
  const src = ["you", "are", "very", "welcome", "here"];
  for (let i = 0; i < 200; i++) {
    const { tokens, logqForward } = m.propose(src, rng);
    const rescored = m.score(src, tokens);
    assert.ok(Math.abs(logqForward - rescored) < 1e-4,
      `mismatch: ${logqForward} vs ${rescored}`);
  }
});

test("all pairwise scores finite, including unicode", () => {
  const m = model();
  const texts = [
    ["you", "are"],
    ["héllo", "☃", "世界"],
    [],
    ["x".repeat(40)],
    ["!@#$%", "a"],
  ];
  for (const src of texts) {
    for (const tgt of texts) {
      const logq = m.score(src, tgt);
      assert.ok(Number.isFinite(logq) && logq <= 0,
        `score(${src} -> ${tgt}) = ${logq}`);
    }
  }
});

test("lone surrogates are rejected as unscoreable", () => {
  const m = model();
  assert.throws(() => m.score(["a"], ["\ud800"]), UnscoreableTokenError);
});

test("temperature 0 proposes the identity deterministically", () => {
  const m = model(0);
  const src = ["you", "are", "here"];
  for (let i = 0; i < 20; i++) {
    const { tokens, logqForward } = m.propose(src, new Rng(i));
    assert.deepEqual(tokens, src);
    assert.ok(Number.isFinite(logqForward) && logqForward <= 0);
  }
});

test("likely edits outscore unrelated text", () => {
  const m = model();
  const src = ["you", "are", "here"];
  const identity = m.score(src, src);
  const lexEdit = m.score(src, ["thou", "art", "here"]);
  const unrelated = m.score(src, ["qqq", "www", "eee", "rrr"]);
  assert.ok(identity > lexEdit, "identity should be most likely");
  assert.ok(lexEdit > unrelated, "lexicon edits should beat arbitrary text");
});

test("empirical proposal frequencies match exp(score)", () => {
  // consistency of the sampler with the force-decoder: bucket proposals
  // from a short source and compare frequencies against the DP probability
  const m = model();
  const rng = new Rng(2024);
  const src = ["you", "are"];
  const draws = 20000;
  const counts = new Map<string, number>();
  for (let i = 0; i < draws; i++) {
    const { tokens } = m.propose(src, rng);
    const key = tokens.join(" ");
    counts.set(key, (counts.get(key) ?? 0) + 1);
  }
  const top = [...counts.entries()].sort((a, b) => b[1] - a[1]).slice(0, 5);
  for (const [key, count] of top) {
    const tgt = key.length ? key.split(" ") : [];
    const p = Math.exp(m.score(src, tgt));
    const sigma = Math.sqrt(p * (1 - p) / draws);
    const freq = count / draws;
    assert.ok(Math.abs(freq - p) < 4 * sigma + 1e-4,
      `${key}: freq ${freq.toFixed(4)} vs p ${p.toFixed(4)}`);
  }
});

test("score handles empty source and empty target", () => {
  const m = model();
  assert.ok(Number.isFinite(m.score([], ["prithee"])));
  assert.ok(Number.isFinite(m.score(["you"], [])));
  assert.ok(m.score([], []) < 0); // still pays the stop probability
});

test("parameter validation", () => {
  assert.throws(() => new EditModel({ ...DEFAULT_EDIT_PARAMS, pIns: 0.7 }, lexicon));
  assert.throws(() => new EditModel({ ...DEFAULT_EDIT_PARAMS, pKeep: 0.5 }, lexicon));
  assert.throws(() => new EditModel({ ...DEFAULT_EDIT_PARAMS, lambdaChar: 0 }, lexicon));
  assert.throws(() => new EditModel(
    { ...DEFAULT_EDIT_PARAMS, pKeep: 0.2, pSub: 0.7, pDel: 0.1 }, lexicon, 0));
});

test("lexicon validation", () => {
  assert.throws(() => parseLexicon({ subs: { a: [["b", -1]] } }));
  assert.throws(() => parseLexicon({ subs: { a: [["b c", 1]] } }));
  assert.throws(() => parseLexicon({ pool: [["", 1]] }));
});
