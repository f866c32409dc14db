/**
 * HTTP surface: POST /v1/adapter dispatched on "op", GET /v1/info.
 *
 *   propose: sample a rewrite of "text"; reply with the candidate plus
 *            logq_forward (force-decoded candidate), logq_reverse
 *            (force-decoded current text given the candidate) and
 *            logq_identity (force-decoded identity edit).
 *   score:   force-decode arbitrary src -> tgt.
 *   energy:  -log classifier posterior for the named term.
 *
 * Errors are JSON bodies {"error": msg, "id": ...} on non-200 statuses.
 * Responses echo the request id and never contain non-finite numbers.
 */

import * as http from "node:http";

import { Rng } from "./rng";
import { EditModel, UnscoreableTokenError } from "./editmodel";
import { ServerConfig, renderPrompt } from "./config";
import { tokenize, detokenize } from "./tokenize";

class RequestError extends Error {
  constructor(public status: number, message: string) {
    super(message);
  }
}

export class AdapterServer {
  private readonly config: ServerConfig;
  private readonly rng: Rng;
  private readonly model: EditModel;
  private readonly models = new Map<number, EditModel>();

  constructor(config: ServerConfig) {
    this.config = config;
    this.rng = new Rng(config.seed);
    this.model = this.modelAt(config.temperature);
  }

  /** Edit models are immutable; cache one per requested temperature. */
  private modelAt(temperature: number): EditModel {
    let m = this.models.get(temperature);
    if (!m) {
      m = new EditModel(this.config.edit, this.config.lexicon, temperature);
      this.models.set(temperature, m);
    }
    return m;
  }

  private toTokens(text: unknown, field: string): string[] {
    if (typeof text !== "string") {
      throw new RequestError(400, `field '${field}' must be a string`);
    }
    const tokens = tokenize(text);
    if (tokens.length > this.config.maxLen) {
      throw new RequestError(
        413,
        `input too long: ${tokens.length} tokens exceeds the documented ` +
        `limit of ${this.config.maxLen}`);
    }
    return tokens;
  }

  handle(request: Record<string, unknown>): Record<string, unknown> {
    const op = request.op;
    if (op === "propose") return this.propose(request);
    if (op === "score") return this.scoreOp(request);
    if (op === "energy") return this.energyOp(request);
    throw new RequestError(400, `unknown op ${JSON.stringify(op)}`);
  }

  private propose(request: Record<string, unknown>): Record<string, unknown> {
    const src = this.toTokens(request.text, "text");
    const params = (request.params ?? {}) as Record<string, unknown>;
    let model = this.model;
    if (params.temperature !== undefined) {
      const t = params.temperature;
      if (typeof t !== "number" || !Number.isFinite(t) || t < 0) {
        throw new RequestError(400, "params.temperature must be a finite number >= 0");
      }
      model = this.modelAt(t);
    }
    // the prompt frames the task for prompted backends; the builtin edit
    // model conditions on the sentence tokens directly
    renderPrompt(this.config.promptTemplate, detokenize(src));
    const { tokens, logqForward } = model.propose(src, this.rng);
    return {
      text: detokenize(tokens),
      logq_forward: logqForward,
      logq_reverse: model.score(tokens, src),
      logq_identity: model.score(src, src),
    };
  }

  private scoreOp(request: Record<string, unknown>): Record<string, unknown> {
    const src = this.toTokens(request.src, "src");
    const tgt = this.toTokens(request.tgt, "tgt");
    return { logq: this.model.score(src, tgt) };
  }

  private energyOp(request: Record<string, unknown>): Record<string, unknown> {
    if (typeof request.text !== "string") {
      throw new RequestError(400, "field 'text' must be a string");
    }
    const name = request.term;
    if (typeof name !== "string") {
      throw new RequestError(400, "field 'term' must be a string");
    }
    const term = this.config.energyTerms.get(name);
    if (!term) {
      const known = [...this.config.energyTerms.keys()].join(", ") || "none";
      throw new RequestError(400, `unknown energy term '${name}' (serving: ${known})`);
    }
    return { energy: term.classifier.energy(request.text, term.targetLabel) };
  }

  info(): Record<string, unknown> {
    return { max_inflight: this.config.maxInflight, model: this.config.model };
  }
}

export function createHttpServer(config: ServerConfig): http.Server {
  const adapter = new AdapterServer(config);

  return http.createServer((req, res) => {
    const reply = (status: number, body: Record<string, unknown>) => {
      const payload = JSON.stringify(body);
      res.writeHead(status, {
        "Content-Type": "application/json",
        "Content-Length": Buffer.byteLength(payload),
      });
      res.end(payload);
    };

    if (req.method === "GET" && req.url === "/v1/info") {
      reply(200, adapter.info());
      return;
    }
    if (req.method !== "POST" || req.url !== "/v1/adapter") {
      reply(404, { error: `no such endpoint ${req.method} ${req.url}` });
      return;
    }

    const chunks: Buffer[] = [];
    req.on("data", (c) => chunks.push(c));
    req.on("end", () => {
      let request: Record<string, unknown>;
      try {
        request = JSON.parse(Buffer.concat(chunks).toString("utf-8"));
      } catch {
        reply(400, { error: "request body is not valid JSON" });
        return;
      }
      const id = request.id ?? null;
      try {
        const body = adapter.handle(request);
        body.id = id;
        for (const [key, value] of Object.entries(body)) {
          if (typeof value === "number" && !Number.isFinite(value)) {
            throw new RequestError(500, `internal: non-finite '${key}'`);
          }
        }
        reply(200, body);
      } catch (err) {
        if (err instanceof RequestError) {
          reply(err.status, { error: err.message, id });
        } else if (err instanceof UnscoreableTokenError) {
          reply(400, { error: `unscoreable input: ${err.message}`, id });
        } else {
          reply(500, { error: String(err), id });
        }
      }
    });
  });
}
