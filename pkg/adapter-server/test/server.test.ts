import assert from "node:assert/strict";
import { after, before, test } from "node:test";
import * as http from "node:http";

import { buildConfig } from "../src/config";
import { createHttpServer } from "../src/server";

let server: http.Server;
let base: string;

function post(body: unknown): Promise<{ status: number; json: Record<string, unknown> }> {
  const payload = typeof body === "string" ? body : JSON.stringify(body);
  return new Promise((resolve, reject) => {
    const req = http.request(`${base}/v1/adapter`, {
      method: "POST",
      headers: { "Content-Type": "application/json" },
    }, (res) => {
      const chunks: Buffer[] = [];
      res.on("data", (c) => chunks.push(c));
      res.on("end", () => resolve({
        status: res.statusCode ?? 0,
        json: JSON.parse(Buffer.concat(chunks).toString("utf-8")),
      }));
    });
    req.on("error", reject);
    req.end(payload);
  });
}

before(async () => {
  const config = buildConfig({
    seed: 7,
    max_len: 500,
    edit: {
      lexicon: null,
      p_ins: 0.08, p_keep: 0.8, p_sub: 0.12, p_del: 0.08,
      lambda_char: 0.05, p_more: 0.6, mu_unicode: 0.01,
    },
    energy_terms: {
      disc: { classifier: "test/fixtures/hand-clf.json", target_label: "fancy" },
    },
  } as unknown as Record<string, unknown>, process.cwd());
  server = createHttpServer(config);
  await new Promise<void>((resolve) => server.listen(0, "127.0.0.1", resolve));
  const addr = server.address();
  base = `http://127.0.0.1:${typeof addr === "object" && addr ? addr.port : 0}`;
});

after(() => new Promise<void>((resolve) => server.close(() => resolve())));

test("propose returns candidate with valid log-probabilities", async () => {
  const { status, json } = await post({
    op: "propose", id: 11, text: "you are here", params: {},
  });
  assert.equal(status, 200);
  assert.equal(json.id, 11);
  assert.equal(typeof json.text, "string");
  for (const key of ["logq_forward", "logq_reverse", "logq_identity"]) {
    const v = json[key];
    assert.equal(typeof v, "number");
    assert.ok(Number.isFinite(v as number) && (v as number) <= 0, `${key}=${v}`);
  }
});

test("propose logq_forward matches a later score call", async () => {
  const text = "the rain stays mainly on the plain";
  const p = await post({ op: "propose", id: 1, text, params: {} });
  const s = await post({ op: "score", id: 2, src: text, tgt: p.json.text });
  assert.equal(s.status, 200);
  const diff = Math.abs((p.json.logq_forward as number) - (s.json.logq as number));
  assert.ok(diff < 1e-4, `logq_forward drifted from score by ${diff}`);
});

test("identity force-decode via score", async () => {
  const { status, json } = await post({ op: "score", id: 3, src: "a b c", tgt: "a b c" });
  assert.equal(status, 200);
  assert.ok((json.logq as number) <= 0 && Number.isFinite(json.logq as number));
});

test("energy op uses the named classifier term", async () => {
  const fancy = await post({ op: "energy", id: 4, text: "c c d", term: "disc" });
  const plain = await post({ op: "energy", id: 5, text: "a a b", term: "disc" });
  assert.equal(fancy.status, 200);
  assert.ok((fancy.json.energy as number) < (plain.json.energy as number));
});

test("unknown energy term is a clean 400", async () => {
  const { status, json } = await post({ op: "energy", id: 6, text: "x", term: "nope" });
  assert.equal(status, 400);
  assert.match(json.error as string, /unknown energy term/);
  assert.equal(json.id, 6);
});

test("unknown op is a clean 400", async () => {
  const { status, json } = await post({ op: "paraphrase", id: 7 });
  assert.equal(status, 400);
  assert.match(json.error as string, /unknown op/);
});

test("invalid JSON body is a clean 400", async () => {
  const { status, json } = await post("{not json");
  assert.equal(status, 400);
  assert.match(json.error as string, /not valid JSON/);
});

test("NaN literal in the request is rejected", async () => {
  const { status } = await post('{"op": "propose", "id": 1, "text": "a", "params": {"temperature": NaN}}');
  assert.equal(status, 400);
});

test("oversized input is rejected with the documented limit", async () => {
  const text = Array(600).fill("token").join(" ");
  const { status, json } = await post({ op: "propose", id: 8, text, params: {} });
  assert.equal(status, 413);
  assert.match(json.error as string, /documented limit of 500/);
});

test("per-request temperature 0 yields the identity", async () => {
  const text = "stay exactly the same";
  const { json } = await post({
    op: "propose", id: 9, text, params: { temperature: 0 },
  });
  assert.equal(json.text, text);
});

test("info endpoint advertises inflight limit and model", async () => {
  const { status, json } = await new Promise<{ status: number; json: Record<string, unknown> }>(
    (resolve, reject) => {
      http.get(`${base}/v1/info`, (res) => {
        const chunks: Buffer[] = [];
        res.on("data", (c) => chunks.push(c));
        res.on("end", () => resolve({
          status: res.statusCode ?? 0,
          json: JSON.parse(Buffer.concat(chunks).toString("utf-8")),
        }));
      }).on("error", reject);
    });
  assert.equal(status, 200);
  assert.equal(typeof json.max_inflight, "number");
  assert.equal(typeof json.model, "string");
});

test("unknown path is 404", async () => {
  const { status } = await new Promise<{ status: number }>((resolve, reject) => {
    const req = http.request(`${base}/v2/other`, { method: "POST" }, (res) => {
      res.resume();
      res.on("end", () => resolve({ status: res.statusCode ?? 0 }));
    });
    req.on("error", reject);
    req.end("{}");
  });
  assert.equal(status, 404);
});
