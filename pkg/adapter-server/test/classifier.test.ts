import assert from "node:assert/strict";
import { test } from "node:test";

import { Classifier } from "../src/classifier";

function handFile() {
  // unigram-only tables: class A {a: 0.8, b: 0.2}, class B mirrored
  return {
    labels: ["A", "B"],
    priors: { A: 0.5, B: 0.5 },
    unigram_logp: {
      A: { a: Math.log(0.8), b: Math.log(0.2), "<oov>": Math.log(1e-9) },
      B: { a: Math.log(0.2), b: Math.log(0.8), "<oov>": Math.log(1e-9) },
    },
    bigram_logp: null,
  };
}

test("hand Bayes posterior", () => {
  const clf = new Classifier(handFile());
  assert.ok(Math.abs(clf.posterior("a", "A") - 0.8) < 1e-12);
  assert.ok(Math.abs(clf.posterior("a", "B") - 0.2) < 1e-12);
  assert.ok(Math.abs(clf.energy("a", "A") + Math.log(0.8)) < 1e-12);
});

test("posteriors over both labels sum to one", () => {
  const clf = new Classifier(handFile());
  for (const text of ["a b a", "b", "zzz unseen tokens", ""]) {
    const total = clf.posterior(text, "A") + clf.posterior(text, "B");
    assert.ok(Math.abs(total - 1) < 1e-9);
  }
});

test("oov tokens fall back to the oov bucket", () => {
  const clf = new Classifier(handFile());
  assert.ok(Math.abs(clf.posterior("mystery", "A") - 0.5) < 1e-12);
});

test("lowercase flag folds input", () => {
  const file = handFile();
  (file as { lowercase?: boolean }).lowercase = true;
  const clf = new Classifier(file);
  assert.equal(clf.posterior("A", "A"), clf.posterior("a", "A"));
});

test("file validation", () => {
  const noOov = handFile();
  delete (noOov.unigram_logp.A as Record<string, number>)["<oov>"];
  assert.throws(() => new Classifier(noOov));
  const oneLabel = { ...handFile(), labels: ["A"] };
  assert.throws(() => new Classifier(oneLabel));
  assert.throws(() => new Classifier(handFile()).posterior("a", "C"));
});
