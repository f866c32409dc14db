"""Proposal distributions for the Metropolis-Hastings chain.

Three kinds are provided: single-token masked replacement (the fixed-length
baseline), built-in span rewrites drawn from an n-gram model (variable
length), and candidates fetched from an external adapter service. Each
proposal reports the log-probability of the forward move it actually made
together with the mirrored reverse move, which is what the acceptance rule
consumes. For composite moves the reverse is the unique mirror of the
forward path (same start index, swapped span lengths), which keeps the
accept/reject step exact without summing over alternative paths.

UNK escape hatch: generation never emits UNK, but states arriving from user
text or adapters may contain it. Reverse scoring of an UNK token uses the
n-gram smoothing floor, so such states remain exchangeable and the chain
can walk out of them.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .ngram import NgramModel
from .seq import TokenSeq, Vocab, tokenize


class ProposalError(Exception):
    """Raised when a proposal cannot be drawn; the engine may treat it as a
    rejected step or abort, per configuration."""


@dataclass(frozen=True)
class ProposalRecord:
    """A candidate state with the log-probabilities the acceptance rule needs.

    logq_identity is the log-probability of proposing the current state from
    itself along the mirror path; it backs the identity-variant acceptance.
    """

    candidate: TokenSeq
    logq_forward: float
    logq_reverse: float
    logq_identity: float | None = None
    is_identity: bool = False

    def __post_init__(self):
        for name in ("logq_forward", "logq_reverse"):
            v = getattr(self, name)
            if not math.isfinite(v):
                raise ValueError(f"{name} must be finite, got {v}")
        if self.logq_identity is not None and not math.isfinite(self.logq_identity):
            raise ValueError(f"logq_identity must be finite, got {self.logq_identity}")


PROPOSAL_KINDS = ("token-mask", "span-block", "adapter-block", "ancestral")

# cond_model(ids, position) -> (event id array, probability array)
MaskedConditional = Callable[[tuple[int, ...], int], tuple[np.ndarray, np.ndarray]]


def _draw(probs: np.ndarray, rng: np.random.Generator) -> int:
    cum = np.cumsum(probs)
    idx = int(np.searchsorted(cum, rng.random() * cum[-1], side="right"))
    return min(idx, len(probs) - 1)


# ------------------------------------------------------------------ token mask


def ngram_masked_conditional(model: NgramModel) -> MaskedConditional:
    """Masked-slot conditional built from the n-gram's left context.

    EOS is excluded and the remaining mass renormalized, matching the span
    machinery, so the slot is always refilled with a regular token.
    """

    def cond(ids: tuple[int, ...], pos: int) -> tuple[np.ndarray, np.ndarray]:
        return model.span_support(ids[:pos])

    cond.model = model  # reverse scoring of out-of-support tokens needs it
    return cond


def propose_token_mask(seq: TokenSeq, cond_model: MaskedConditional,
                       rng: np.random.Generator) -> ProposalRecord:
    """Resample one uniformly chosen position; candidate length never changes."""
    n = len(seq)
    if n == 0:
        raise ProposalError("token-mask requires non-empty state")
    pos = int(rng.integers(n))
    events, probs = cond_model(seq.ids, pos)
    j = _draw(probs, rng)
    new_id = int(events[j])
    old_id = seq.ids[pos]
    sel = -math.log(n)
    logp_new = float(np.log(probs[j]))
    where = np.nonzero(events == old_id)[0]
    if len(where):
        logp_old = float(np.log(probs[int(where[0])]))
    else:
        model: NgramModel | None = getattr(cond_model, "model", None)
        if model is None:
            raise ProposalError(f"current token id {old_id} outside proposal support")
        logp_old = model.span_event_logp(seq.ids[:pos], old_id)
    candidate = seq.with_ids(seq.ids[:pos] + (new_id,) + seq.ids[pos + 1:])
    return ProposalRecord(
        candidate=candidate,
        logq_forward=sel + logp_new,
        logq_reverse=sel + logp_old,
        logq_identity=sel + logp_old,
        is_identity=candidate.ids == seq.ids,
    )


# ------------------------------------------------------------------ span block


@dataclass(frozen=True)
class SpanCfg:
    """max_span bounds the replaced span, max_new the regenerated one.

    Both draws are additionally capped by min(max_span, max_new) so that
    every forward move has a feasible mirror: the reverse must treat the m
    new tokens as its replaced span and regenerate the l old ones.
    """

    max_span: int = 3
    max_new: int = 3

    def __post_init__(self):
        if self.max_span < 0 or self.max_new < 0:
            raise ValueError("span bounds must be >= 0")

    @property
    def shared_cap(self) -> int:
        return min(self.max_span, self.max_new)


def _span_selection_logp(n: int, i: int, cap: int) -> tuple[float, float]:
    """(log P(start=i), log P(old span length)) under the uniform rules."""
    return -math.log(n + 1), -math.log(min(cap, n - i) + 1)


def propose_span_block(seq: TokenSeq, model: NgramModel, cfg: SpanCfg,
                       rng: np.random.Generator) -> ProposalRecord:
    """Replace a uniformly chosen span with a freshly generated one.

    Start index i is uniform over 0..len (inclusive, so pure insertion at
    the end is possible); the old span length l and new length m are uniform
    under the shared cap. The mirror move from the candidate picks the same
    i, treats the m new tokens as its old span, and regenerates the l
    removed tokens, scored with score_span on the identical prefix.
    """
    ids = seq.ids
    n = len(ids)
    cap = cfg.shared_cap
    i = int(rng.integers(n + 1))
    span_cap = min(cap, n - i)
    ell = int(rng.integers(span_cap + 1))
    m = int(rng.integers(cap + 1))
    new_ids, span_logp = model.generate_span(ids[:i], m, rng)
    candidate_ids = ids[:i] + new_ids + ids[i + ell:]
    candidate = seq.with_ids(candidate_ids)
    n_cand = len(candidate_ids)

    sel_i, sel_l = _span_selection_logp(n, i, cap)
    logq_forward = sel_i + sel_l - math.log(cap + 1) + span_logp

    rev_i, rev_l = _span_selection_logp(n_cand, i, cap)
    rev_span_logp = model.score_span(ids[:i], ids[i:i + ell])
    logq_reverse = rev_i + rev_l - math.log(cap + 1) + rev_span_logp

    # identity mirror: same start, zero-length spans both ways
    logq_identity = sel_i + sel_l - math.log(cap + 1)

    return ProposalRecord(
        candidate=candidate,
        logq_forward=logq_forward,
        logq_reverse=logq_reverse,
        logq_identity=logq_identity,
        is_identity=candidate_ids == ids,
    )


# ------------------------------------------------------------------ ancestral


def propose_ancestral(seq: TokenSeq, model: NgramModel,
                      rng: np.random.Generator) -> ProposalRecord:
    """Independence proposal: redraw the whole sequence ancestrally.

    With an energy equal to the model's own negative log-likelihood the
    acceptance ratio is identically one, which turns the chain into exact
    ancestral sampling; useful as an oracle inside the evaluation harness.
    """
    sample = model.ancestral_sample(rng)
    return ProposalRecord(
        candidate=sample.seq,
        logq_forward=sample.logp,
        logq_reverse=model.sample_logp(seq.ids),
        logq_identity=model.sample_logp(seq.ids),
        is_identity=sample.seq.ids == seq.ids,
    )


# ------------------------------------------------------------------ adapter


def propose_adapter_block(seq: TokenSeq, client, vocab: Vocab,
                          rng: np.random.Generator | None = None,
                          params: dict | None = None) -> ProposalRecord:
    """Fetch a whole-sequence rewrite from an external adapter service.

    The server owns the proposal distribution and reports forward, reverse
    and identity log-probabilities under its own tokenizer; the candidate
    text is retokenized locally. Transport or contract failures surface as
    ProposalError.
    """
    from .adapter import AdapterError

    try:
        resp = client.propose(seq.text, params)
    except AdapterError as exc:
        raise ProposalError(str(exc)) from exc
    candidate = tokenize(resp["text"], vocab)
    return ProposalRecord(
        candidate=candidate,
        logq_forward=float(resp["logq_forward"]),
        logq_reverse=float(resp["logq_reverse"]),
        logq_identity=float(resp["logq_identity"]),
        is_identity=candidate.ids == seq.ids,
    )


# ------------------------------------------------------------------ engine-facing wrappers


class TokenMaskProposal:
    kind = "token-mask"

    def __init__(self, cond_model: MaskedConditional):
        self.cond_model = cond_model

    @classmethod
    def from_model(cls, model: NgramModel) -> "TokenMaskProposal":
        return cls(ngram_masked_conditional(model))

    def __call__(self, seq: TokenSeq, rng: np.random.Generator) -> ProposalRecord:
        return propose_token_mask(seq, self.cond_model, rng)


class SpanBlockProposal:
    kind = "span-block"

    def __init__(self, model: NgramModel, cfg: SpanCfg | None = None):
        self.model = model
        self.cfg = cfg or SpanCfg()

    def __call__(self, seq: TokenSeq, rng: np.random.Generator) -> ProposalRecord:
        return propose_span_block(seq, self.model, self.cfg, rng)


class AncestralProposal:
    kind = "ancestral"

    def __init__(self, model: NgramModel):
        self.model = model

    def __call__(self, seq: TokenSeq, rng: np.random.Generator) -> ProposalRecord:
        return propose_ancestral(seq, self.model, rng)


class AdapterBlockProposal:
    kind = "adapter-block"

    def __init__(self, client, vocab: Vocab, params: dict | None = None):
        self.client = client
        self.vocab = vocab
        self.params = params

    def __call__(self, seq: TokenSeq, rng: np.random.Generator) -> ProposalRecord:
        return propose_adapter_block(seq, self.client, self.vocab, rng, self.params)
