"""Add-k smoothed n-gram language model with exact scoring and sampling.

This model plays the oracle role: its likelihoods are exact, ancestral
draws are exact samples from the sequence distribution it defines, and
span generation/scoring share one code path so that reverse proposal
probabilities can be reproduced bit-for-bit.

Event space and smoothing. For a context c (the preceding order-1 ids,
BOS-padded), the conditional support is the regular vocabulary plus EOS:

    P(w | c) = (count(c, w) + k) / (total(c) + k * (|V| + 1))

where total(c) sums the counts of all support events observed after c,
including the end-of-sequence transition. Every support event therefore
has strictly positive probability and the conditionals sum to exactly 1.

UNK sits outside the event space on purpose: generation never emits it,
it is skipped as a training event, and when a scored sequence contains it
the unseen-event floor k / (total(c) + k * (|V| + 1)) is used so scoring
stays finite. UNK-bearing sequences are thus scoreable but lie outside
the normalized generative space.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .seq import BOS, BOS_ID, EOS, EOS_ID, NUM_RESERVED, UNK_ID, TokenSeq, Vocab


@dataclass(frozen=True)
class Sample:
    """One ancestral draw; ``truncated`` marks a hit of the length cap.

    ``logp`` is the exact log-probability of this draw as an outcome of the
    sampling procedure (the EOS factor is included only when the draw
    actually terminated with EOS).
    """

    seq: TokenSeq
    truncated: bool
    logp: float


def _ids_of(x) -> tuple[int, ...]:
    return tuple(x.ids) if isinstance(x, TokenSeq) else tuple(x)


class NgramModel:
    """Immutable after training; scoring is pure and cache-backed."""

    def __init__(self, vocab: Vocab, order: int, k: float, max_len: int = 32):
        if order < 1:
            raise ValueError("order must be >= 1")
        if not (k > 0):
            raise ValueError("smoothing constant k must be > 0")
        if max_len < 1:
            raise ValueError("max_len must be >= 1")
        self.vocab = vocab
        self.order = int(order)
        self.k = float(k)
        self.max_len = int(max_len)
        # context id-tuple -> {event id -> count}; events are regular ids or EOS_ID
        self._counts: dict[tuple[int, ...], dict[int, int]] = {}
        self._totals: dict[tuple[int, ...], int] = {}
        # support order: regular ids ascending, then EOS
        self._support = tuple(vocab.regular_ids) + (EOS_ID,)
        self._prob_cache: dict[tuple[int, ...], np.ndarray] = {}
        self._cum_cache: dict[tuple[int, ...], np.ndarray] = {}
        self._span_cache: dict[tuple[int, ...], tuple[np.ndarray, np.ndarray]] = {}

    # ---------------------------------------------------------------- train

    @classmethod
    def train(cls, corpus: Sequence[TokenSeq], order: int, k: float,
              max_len: int = 32) -> "NgramModel":
        corpus = list(corpus)
        if not corpus:
            raise ValueError("empty corpus")
        model = cls(corpus[0].vocab, order, k, max_len=max_len)
        for seq in corpus:
            padded = (BOS_ID,) * (order - 1) + tuple(seq.ids)
            events = list(seq.ids) + [EOS_ID]
            for j, ev in enumerate(events):
                if ev == UNK_ID:
                    continue  # UNK is not a support event
                ctx = padded[j:j + order - 1]
                row = model._counts.setdefault(ctx, {})
                row[ev] = row.get(ev, 0) + 1
                model._totals[ctx] = model._totals.get(ctx, 0) + 1
        return model

    # ---------------------------------------------------------------- probs

    def _denom(self, ctx: tuple[int, ...]) -> float:
        return self._totals.get(ctx, 0) + self.k * (self.vocab.size + 1)

    def cond_probs(self, ctx: tuple[int, ...]) -> np.ndarray:
        """Smoothed conditionals over the support (regular ids, then EOS)."""
        cached = self._prob_cache.get(ctx)
        if cached is not None:
            return cached
        row = self._counts.get(ctx, {})
        counts = np.fromiter((row.get(e, 0) for e in self._support),
                             dtype=float, count=len(self._support))
        probs = (counts + self.k) / self._denom(ctx)
        self._prob_cache[ctx] = probs
        return probs

    def _cond_cum(self, ctx: tuple[int, ...]) -> np.ndarray:
        cached = self._cum_cache.get(ctx)
        if cached is None:
            cached = np.cumsum(self.cond_probs(ctx))
            self._cum_cache[ctx] = cached
        return cached

    def event_logp(self, ctx: tuple[int, ...], event: int) -> float:
        """log P(event | ctx); UNK gets the unseen-event floor."""
        if event == EOS_ID:
            idx = len(self._support) - 1
        elif NUM_RESERVED <= event < NUM_RESERVED + self.vocab.size:
            idx = event - NUM_RESERVED
        else:
            return math.log(self.k) - math.log(self._denom(ctx))
        return float(np.log(self.cond_probs(ctx)[idx]))

    def _ctx_for(self, prefix_ids: tuple[int, ...]) -> tuple[int, ...]:
        if self.order == 1:
            return ()
        padded = (BOS_ID,) * (self.order - 1) + prefix_ids
        return padded[len(padded) - (self.order - 1):]

    # ---------------------------------------------------------------- score

    def log_prob(self, seq: TokenSeq | Sequence[int]) -> float:
        """Exact log-probability of the sequence, EOS transition included."""
        ids = _ids_of(seq)
        total = 0.0
        for j, ev in enumerate(list(ids) + [EOS_ID]):
            total += self.event_logp(self._ctx_for(ids[:j]), ev)
        return total

    def sample_logp(self, ids: Sequence[int]) -> float:
        """Log-probability of ``ids`` as an ancestral-sampling outcome.

        Identical to log_prob below max_len; at exactly max_len the draw is
        truncated before an EOS could be sampled, so the EOS factor is
        dropped.
        """
        ids = _ids_of(ids)
        total = 0.0
        for j, ev in enumerate(ids):
            total += self.event_logp(self._ctx_for(ids[:j]), ev)
        if len(ids) < self.max_len:
            total += self.event_logp(self._ctx_for(ids), EOS_ID)
        return total

    # --------------------------------------------------------------- sample

    def ancestral_sample(self, rng: np.random.Generator) -> Sample:
        """Exact left-to-right draw until EOS or max_len."""
        ids: list[int] = []
        logp = 0.0
        while True:
            ctx = self._ctx_for(tuple(ids))
            cum = self._cond_cum(ctx)
            idx = int(np.searchsorted(cum, rng.random(), side="right"))
            idx = min(idx, len(self._support) - 1)
            logp += float(np.log(self.cond_probs(ctx)[idx]))
            event = self._support[idx]
            if event == EOS_ID:
                return Sample(TokenSeq(tuple(ids), self.vocab), False, logp)
            ids.append(event)
            if len(ids) >= self.max_len:
                return Sample(TokenSeq(tuple(ids), self.vocab), True, logp)

    # ---------------------------------------------------------------- spans

    def span_support(self, prefix_ids: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
        """(event ids, probs) for the next token with EOS excluded.

        Renormalizing over regular tokens keeps generated spans at exactly
        the requested length.
        """
        if self.vocab.size == 0:
            raise ValueError("span generation needs a non-empty vocabulary")
        ctx = self._ctx_for(_ids_of(prefix_ids))
        cached = self._span_cache.get(ctx)
        if cached is not None:
            return cached
        probs = self.cond_probs(ctx)[:-1]
        probs = probs / probs.sum()
        out = (np.asarray(self._support[:-1], dtype=int), probs)
        self._span_cache[ctx] = out
        return out

    def span_event_logp(self, prefix_ids: Sequence[int], event: int) -> float:
        """Renormalized (EOS-excluded) log-prob of one span token.

        Out-of-support events (UNK) use the smoothing floor over the same
        renormalizer, so reverse scoring of UNK-bearing spans stays finite.
        """
        prefix = _ids_of(prefix_ids)
        ctx = self._ctx_for(prefix)
        probs = self.cond_probs(ctx)
        keep = math.log1p(-float(probs[-1]))  # log(1 - P(EOS | ctx))
        if NUM_RESERVED <= event < NUM_RESERVED + self.vocab.size:
            return float(np.log(probs[event - NUM_RESERVED])) - keep
        return math.log(self.k) - math.log(self._denom(ctx)) - keep

    def generate_span(self, left_context: TokenSeq | Sequence[int], length: int,
                      rng: np.random.Generator) -> tuple[tuple[int, ...], float]:
        """Sample exactly ``length`` tokens after left_context.

        Returns the token ids and their exact conditional log-probability
        under the renormalized (EOS-excluded) conditionals; reproducible by
        score_span on the same arguments.
        """
        if length < 0:
            raise ValueError("span length must be >= 0")
        prefix = list(_ids_of(left_context))
        out: list[int] = []
        logp = 0.0
        for _ in range(length):
            events, probs = self.span_support(tuple(prefix))
            cum = np.cumsum(probs)
            idx = int(np.searchsorted(cum, rng.random(), side="right"))
            idx = min(idx, len(events) - 1)
            ev = int(events[idx])
            logp += float(np.log(probs[idx]))
            out.append(ev)
            prefix.append(ev)
        return tuple(out), logp

    def score_span(self, left_context: TokenSeq | Sequence[int],
                   tokens: Sequence[int]) -> float:
        """Exact log-probability of ``tokens`` under generate_span's law."""
        prefix = list(_ids_of(left_context))
        logp = 0.0
        for ev in _ids_of(tokens):
            logp += self.span_event_logp(tuple(prefix), ev)
            prefix.append(ev)
        return logp

    # ------------------------------------------------------------ serialize

    def to_dict(self, vocab_ref: str) -> dict:
        def tok(i: int) -> str:
            return BOS if i == BOS_ID else EOS if i == EOS_ID else self.vocab.token_of(i)

        rows = []
        for ctx in sorted(self._counts, key=lambda c: tuple(tok(i) for i in c)):
            events = sorted(((tok(e), n) for e, n in self._counts[ctx].items()),
                            key=lambda p: p[0])
            rows.append([[tok(i) for i in ctx], [[t, n] for t, n in events]])
        return {
            "order": self.order,
            "k": self.k,
            "max_len": self.max_len,
            "vocab_ref": vocab_ref,
            "counts": rows,
        }

    def save(self, path: str | Path, vocab_ref: str) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(vocab_ref), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def from_dict(cls, obj: dict, vocab: Vocab) -> "NgramModel":
        model = cls(vocab, obj["order"], obj["k"], max_len=obj["max_len"])

        def ident(t: str) -> int:
            if t == BOS:
                return BOS_ID
            if t == EOS:
                return EOS_ID
            return vocab.id_of(t)

        for ctx_toks, events in obj["counts"]:
            ctx = tuple(ident(t) for t in ctx_toks)
            row = model._counts.setdefault(ctx, {})
            for t, n in events:
                ev = ident(t)
                row[ev] = row.get(ev, 0) + int(n)
                model._totals[ctx] = model._totals.get(ctx, 0) + int(n)
        return model

    @classmethod
    def load(cls, path: str | Path, vocab: Vocab | None = None) -> "NgramModel":
        path = Path(path)
        obj = json.loads(path.read_text(encoding="utf-8"))
        if vocab is None:
            ref = Path(obj["vocab_ref"])
            if not ref.is_absolute():
                ref = path.parent / ref
            vocab = Vocab.load(ref)
        return cls.from_dict(obj, vocab)


def train_corpus_lines(lines: Iterable[str], vocab: Vocab, order: int, k: float,
                       max_len: int = 32) -> NgramModel:
    """Convenience: tokenize raw lines with ``vocab`` and train."""
    from .seq import tokenize

    seqs = [tokenize(line, vocab) for line in lines]
    if not seqs:
        raise ValueError("empty corpus")
    return NgramModel.train(seqs, order, k, max_len=max_len)
