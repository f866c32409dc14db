"""Client side of the adapter wire protocol.

External proposal and energy services plug into the sampler through a
single JSON-over-HTTP endpoint (POST /v1/adapter), dispatched on "op":

    {"op": "propose", "id": ..., "text": str, "params": {...}}
        -> {"id": ..., "text": str, "logq_forward": r, "logq_reverse": r,
            "logq_identity": r}
    {"op": "energy", "id": ..., "text": str, "term": str}
        -> {"id": ..., "energy": r}
    {"op": "score", "id": ..., "src": str, "tgt": str}
        -> {"id": ..., "logq": r}

All log-probabilities must be finite and <= 0; all numbers must be plain
JSON numbers (NaN/Infinity literals are rejected). Responses echo the
request id. Servers report errors as non-200 responses with a JSON body
{"error": str}. The client transports values and never recomputes them;
retokenization of proposal text happens downstream.
"""

from __future__ import annotations

import json
import math
import os
import socket
import urllib.error
import urllib.request
from dataclasses import dataclass, field
from itertools import count

DEFAULT_ENDPOINT = "http://127.0.0.1:8750/v1/adapter"
ENDPOINT_ENV_VAR = "EBMH_ADAPTER_URL"


class AdapterError(Exception):
    """Base class for adapter failures."""


class AdapterTimeoutError(AdapterError):
    """The server did not answer within the timeout (after retries)."""


class AdapterHTTPError(AdapterError):
    """Transport-level failure or non-200 response."""


class AdapterSchemaError(AdapterError):
    """The response was not JSON or lacked required fields/types."""


class AdapterValueError(AdapterError):
    """A numeric field violated the contract (non-finite or positive logq)."""


def resolve_endpoint(endpoint: str | None = None) -> str:
    """Operator override first: the env var beats any configured endpoint."""
    return os.environ.get(ENDPOINT_ENV_VAR) or endpoint or DEFAULT_ENDPOINT


def _reject_constant(name: str):
    raise AdapterValueError(f"response contains non-finite JSON literal {name}")


def _require_number(obj: dict, key: str, *, logprob: bool) -> float:
    if key not in obj:
        raise AdapterSchemaError(f"response missing field '{key}'")
    v = obj[key]
    if isinstance(v, bool) or not isinstance(v, (int, float)):
        raise AdapterSchemaError(f"field '{key}' must be a number, got {type(v).__name__}")
    v = float(v)
    if not math.isfinite(v):
        raise AdapterValueError(f"field '{key}' is non-finite")
    if logprob and v > 0.0:
        raise AdapterValueError(f"invalid log-probability: '{key}' = {v} > 0")
    return v


def _validate_response(op: str, request_id, obj: dict) -> dict:
    if not isinstance(obj, dict):
        raise AdapterSchemaError("response must be a JSON object")
    if obj.get("id") != request_id:
        raise AdapterSchemaError(
            f"response id {obj.get('id')!r} does not echo request id {request_id!r}")
    if op == "propose":
        if not isinstance(obj.get("text"), str):
            raise AdapterSchemaError("propose response needs a string 'text'")
        for key in ("logq_forward", "logq_reverse", "logq_identity"):
            obj[key] = _require_number(obj, key, logprob=True)
    elif op == "energy":
        obj["energy"] = _require_number(obj, "energy", logprob=False)
    elif op == "score":
        obj["logq"] = _require_number(obj, "logq", logprob=True)
    else:
        raise ValueError(f"unknown op '{op}'")
    return obj


def client_call(endpoint: str, request: dict, timeout: float = 10.0,
                retries: int = 1) -> dict:
    """POST one request object and return the validated response.

    Timeouts are retried ``retries`` times before surfacing; every other
    failure surfaces immediately as its distinct error class.
    """
    payload = dict(request)
    op = payload.get("op")
    request_id = payload.setdefault("id", 0)
    body = json.dumps(payload, ensure_ascii=False, allow_nan=False).encode("utf-8")
    attempts = retries + 1
    for attempt in range(attempts):
        req = urllib.request.Request(
            endpoint, data=body, headers={"Content-Type": "application/json"},
            method="POST")
        try:
            with urllib.request.urlopen(req, timeout=timeout) as resp:
                raw = resp.read().decode("utf-8")
            break
        except urllib.error.HTTPError as exc:
            try:
                detail = json.loads(exc.read().decode("utf-8")).get("error", "")
            except Exception:
                detail = ""
            raise AdapterHTTPError(
                f"adapter returned HTTP {exc.code}: {detail or exc.reason}") from exc
        except (socket.timeout, TimeoutError) as exc:
            if attempt + 1 < attempts:
                continue
            raise AdapterTimeoutError(
                f"adapter timed out after {attempts} attempt(s)") from exc
        except urllib.error.URLError as exc:
            if isinstance(exc.reason, (socket.timeout, TimeoutError)):
                if attempt + 1 < attempts:
                    continue
                raise AdapterTimeoutError(
                    f"adapter timed out after {attempts} attempt(s)") from exc
            raise AdapterHTTPError(f"adapter unreachable: {exc.reason}") from exc
    try:
        obj = json.loads(raw, parse_constant=_reject_constant)
    except AdapterValueError:
        raise
    except ValueError as exc:
        raise AdapterSchemaError(f"response is not valid JSON: {exc}") from exc
    return _validate_response(op, request_id, obj)


@dataclass
class AdapterClient:
    """Thin convenience wrapper assigning monotonically increasing request ids."""

    endpoint: str = field(default_factory=resolve_endpoint)
    timeout: float = 10.0
    retries: int = 1

    def __post_init__(self):
        self._ids = count()

    def _call(self, request: dict) -> dict:
        request["id"] = next(self._ids)
        return client_call(self.endpoint, request, timeout=self.timeout,
                           retries=self.retries)

    def propose(self, text: str, params: dict | None = None) -> dict:
        return self._call({"op": "propose", "text": text, "params": params or {}})

    def energy(self, text: str, term: str) -> dict:
        return self._call({"op": "energy", "text": text, "term": term})

    def score(self, src: str, tgt: str) -> dict:
        return self._call({"op": "score", "src": src, "tgt": tgt})


# ------------------------------------------------------------------ conformance


@dataclass
class CheckResult:
    name: str
    passed: bool
    detail: str = ""


@dataclass
class ConformanceReport:
    endpoint: str
    checks: list[CheckResult] = field(default_factory=list)

    @property
    def passed(self) -> bool:
        return all(c.passed for c in self.checks)

    def to_dict(self) -> dict:
        return {
            "endpoint": self.endpoint,
            "passed": self.passed,
            "checks": [{"name": c.name, "passed": c.passed, "detail": c.detail}
                       for c in self.checks],
        }

    def __str__(self) -> str:
        lines = [f"conformance @ {self.endpoint}: "
                 f"{'PASS' if self.passed else 'FAIL'}"]
        for c in self.checks:
            status = "ok  " if c.passed else "FAIL"
            lines.append(f"  [{status}] {c.name}" + (f" - {c.detail}" if c.detail else ""))
        return "\n".join(lines)


def conformance_suite(endpoint: str, *, energy_term: str = "disc",
                      timeout: float = 30.0) -> ConformanceReport:
    """Exercise every protocol op against a live server.

    A server passing this suite is usable by the adapter-block proposal
    without further adaptation.
    """
    client = AdapterClient(endpoint=endpoint, timeout=timeout)
    report = ConformanceReport(endpoint=endpoint)

    def check(name: str, fn) -> None:
        try:
            detail = fn() or ""
            report.checks.append(CheckResult(name, True, detail))
        except AssertionError as exc:
            report.checks.append(CheckResult(name, False, str(exc)))
        except AdapterError as exc:
            report.checks.append(CheckResult(name, False,
                                             f"{type(exc).__name__}: {exc}"))

    short = "the quick brown fox jumps over the lazy dog"

    def c_propose():
        resp = client.propose(short)
        assert resp["text"].strip() != "", "proposal text is empty"
        return f"candidate: {resp['text'][:40]!r}"

    def c_identity_field():
        resp = client.propose(short)
        assert resp["logq_identity"] <= 0.0, "logq_identity must be <= 0"

    def c_score():
        resp = client.score(short, short)
        assert resp["logq"] <= 0.0, "identity force-decode must have logq <= 0"
        return f"logq(self)={resp['logq']:.4f}"

    def c_score_cross():
        resp = client.propose(short)
        rescored = client.score(short, resp["text"])
        assert math.isfinite(rescored["logq"]), "cross score must be finite"

    def c_energy():
        resp = client.energy(short, energy_term)
        assert math.isfinite(resp["energy"]), "energy must be finite"
        return f"energy[{energy_term}]={resp['energy']:.4f}"

    def c_single_token():
        resp = client.propose("hello")
        assert isinstance(resp["text"], str)

    def c_long_input():
        text = " ".join(["token"] * 1000)
        try:
            client.propose(text)
        except AdapterHTTPError:
            return "long input cleanly rejected"
        return "long input handled"

    check("propose-basic", c_propose)
    check("propose-identity-logq", c_identity_field)
    check("score-identity", c_score)
    check("score-candidate", c_score_cross)
    check("energy-term", c_energy)
    check("propose-single-token", c_single_token)
    check("long-input", c_long_input)
    return report
