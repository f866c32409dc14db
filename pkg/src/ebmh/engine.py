"""The Metropolis-Hastings chain: acceptance rule, batch execution, traces.

Acceptance. For current state X with energy E(X) and a proposed candidate
X' with energy E(X'), strict mode accepts with probability

    min(1, exp(E(X) - E(X')) * exp(logq_reverse - logq_forward))

computed in log space with clamping. The global normalizer of the target
distribution cancels in the ratio, which is the whole point of running MH
on an energy model. The identity-variant mode substitutes logq_identity
for logq_reverse: proposal models with a strong propensity for identity
edits otherwise mix very slowly, at the acknowledged cost of forfeiting
the exact stationary distribution. Strict mode is the default for built-in
proposals and for every correctness test; identity-variant is the default
for adapter-backed runs.
"""

from __future__ import annotations

import itertools
import json
import math
from dataclasses import asdict, dataclass, field
from pathlib import Path
from typing import Callable, Iterable

import numpy as np

from .energy import EnergyError, EnergySpec, EnergyTerm, total_energy
from .proposal import ProposalError, ProposalRecord
from .seq import TokenSeq, Vocab, tokenize

LOG_CLAMP = 700.0
MODES = ("strict", "identity-variant")

Proposal = Callable[[TokenSeq, np.random.Generator], ProposalRecord]


def accept_prob(e_cur: float, e_cand: float, rec: ProposalRecord,
                mode: str = "strict") -> float:
    """Acceptance probability in [0, 1]; log-space with +-700 clamping."""
    if mode not in MODES:
        raise ValueError(f"unknown acceptance mode '{mode}'")
    if mode == "strict":
        logq_back = rec.logq_reverse
    else:
        if rec.logq_identity is None:
            raise ValueError("identity-variant mode needs logq_identity")
        logq_back = rec.logq_identity
    for v in (e_cur, e_cand, logq_back, rec.logq_forward):
        if not math.isfinite(v):
            raise ValueError("non-finite acceptance ratio")
    log_ratio = (e_cur - e_cand) + (logq_back - rec.logq_forward)
    log_ratio = max(-LOG_CLAMP, min(LOG_CLAMP, log_ratio))
    return min(1.0, math.exp(log_ratio))


@dataclass
class TraceEntry:
    chain_id: int
    step: int
    candidate_text: str
    energy_current: float
    energy_candidate: float
    logq_forward: float
    logq_reverse: float
    logq_identity: float | None
    accept_prob: float
    accepted: bool


@dataclass
class ChainState:
    """Current sequence with its cached energy and bookkeeping counters.

    The cached energy always equals total_energy(spec, seq); step() is the
    only writer and keeps the two in lockstep.
    """

    seq: TokenSeq
    energy: float
    rng: np.random.Generator
    step: int = 0
    accepts: int = 0
    chain_id: int = 0
    errors: list[str] = field(default_factory=list)
    failed: bool = False


def step(state: ChainState, propose: Proposal, spec: EnergySpec, mode: str,
         trace_sink: Callable[[TraceEntry], None] | None = None,
         on_error: str = "reject", allow_empty: bool = True) -> ChainState:
    """Advance the chain by one proposal; mutates and returns ``state``."""
    try:
        rec = propose(state.seq, state.rng)
        e_cand = total_energy(spec, rec.candidate)
    except (ProposalError, EnergyError) as exc:
        if on_error == "abort":
            raise
        state.step += 1
        state.errors.append(f"step {state.step}: {exc}")
        return state

    if not allow_empty and len(rec.candidate) == 0 and len(state.seq) > 0:
        p = 0.0  # empty states are outside the configured space
    else:
        p = accept_prob(state.energy, e_cand, rec, mode)
    accepted = bool(state.rng.random() < p)
    e_before = state.energy
    state.step += 1
    if accepted:
        state.seq = rec.candidate
        state.energy = e_cand
        state.accepts += 1
    if trace_sink is not None:
        trace_sink(TraceEntry(
            chain_id=state.chain_id,
            step=state.step,
            candidate_text=rec.candidate.text,
            energy_current=e_before,
            energy_candidate=e_cand,
            logq_forward=rec.logq_forward,
            logq_reverse=rec.logq_reverse,
            logq_identity=rec.logq_identity,
            accept_prob=p,
            accepted=accepted,
        ))
    return state


@dataclass
class MHConfig:
    """Resolved run configuration; the JSON mirror lives in the CLI layer."""

    steps: int
    init_text: str
    vocab: Vocab
    energy: EnergySpec
    proposal: Proposal
    batch_size: int = 10
    mode: str = "strict"
    seed: int = 0
    burn_in: int = 0
    thinning: int = 1
    on_error: str = "reject"
    allow_empty: bool = False
    collect_samples: bool = False

    def validate(self) -> None:
        if self.steps < 1:
            raise ValueError("steps must be >= 1")
        if self.batch_size < 1:
            raise ValueError("batch_size must be >= 1")
        if self.mode not in MODES:
            raise ValueError(f"unknown acceptance mode '{self.mode}'")
        if self.on_error not in ("reject", "abort"):
            raise ValueError(f"unknown on_error policy '{self.on_error}'")
        if self.burn_in < 0 or self.thinning < 1:
            raise ValueError("burn_in must be >= 0 and thinning >= 1")


@dataclass
class BatchResult:
    chains: list[ChainState]
    best_chain: int
    best: TokenSeq
    best_energy: float
    init_energy: float
    init_text: str
    traces: list[TraceEntry]
    samples: list[list[TokenSeq]]

    def summary(self) -> dict:
        return {
            "best_text": self.best.text,
            "best_energy": self.best_energy,
            "best_chain": self.best_chain,
            "init_text": self.init_text,
            "init_energy": self.init_energy,
            "per_chain": [
                {
                    "chain_id": st.chain_id,
                    "final_text": st.seq.text,
                    "final_energy": st.energy,
                    "steps": st.step,
                    "accepts": st.accepts,
                    "errors": len(st.errors),
                    "failed": st.failed,
                }
                for st in self.chains
            ],
        }


def run_batch(cfg: MHConfig,
              trace_sink: Callable[[TraceEntry], None] | None = None) -> BatchResult:
    """Run ``batch_size`` independent chains from the same seed text.

    Chain c draws from a generator seeded with (seed, c), so results are
    identical under any execution order. The best output is the final state
    with minimum energy, ties broken by lowest chain id; chains that abort
    are excluded from the argmin.
    """
    cfg.validate()
    init = tokenize(cfg.init_text, cfg.vocab)
    if len(init) == 0 and not cfg.allow_empty:
        raise ValueError("init_text: empty initial state not allowed by config")
    init_energy = total_energy(cfg.energy, init)

    traces: list[TraceEntry] = []

    def sink(entry: TraceEntry) -> None:
        traces.append(entry)
        if trace_sink is not None:
            trace_sink(entry)

    chains: list[ChainState] = []
    samples: list[list[TokenSeq]] = []
    for chain_id in range(cfg.batch_size):
        rng = np.random.default_rng([cfg.seed, chain_id])
        st = ChainState(seq=init, energy=init_energy, rng=rng, chain_id=chain_id)
        kept: list[TokenSeq] = []
        try:
            for _ in range(cfg.steps):
                step(st, cfg.proposal, cfg.energy, cfg.mode, sink,
                     on_error=cfg.on_error, allow_empty=cfg.allow_empty)
                if cfg.collect_samples and st.step > cfg.burn_in \
                        and (st.step - cfg.burn_in) % cfg.thinning == 0:
                    kept.append(st.seq)
        except (ProposalError, EnergyError) as exc:
            st.failed = True
            st.errors.append(f"aborted at step {st.step + 1}: {exc}")
        chains.append(st)
        samples.append(kept)

    alive = [st for st in chains if not st.failed]
    if not alive:
        details = "; ".join(st.errors[-1] for st in chains if st.errors)
        raise RuntimeError(f"all chains failed: {details}")
    best = min(alive, key=lambda st: (st.energy, st.chain_id))
    return BatchResult(
        chains=chains,
        best_chain=best.chain_id,
        best=best.seq,
        best_energy=best.energy,
        init_energy=init_energy,
        init_text=init.text,
        traces=traces,
        samples=samples,
    )


def write_trace_ndjson(traces: Iterable[TraceEntry], path: str | Path) -> None:
    """One JSON object per line, fields exactly as named on TraceEntry."""
    with Path(path).open("w", encoding="utf-8") as fh:
        for entry in traces:
            fh.write(json.dumps(asdict(entry), ensure_ascii=False) + "\n")


# ------------------------------------------------------------------ toy-space check

BARRIER_ENERGY = 1e6


def enumerate_space(vocab: Vocab, max_len: int) -> list[TokenSeq]:
    """Every sequence over the regular vocabulary up to max_len, empty included."""
    out: list[TokenSeq] = []
    for length in range(max_len + 1):
        for combo in itertools.product(vocab.regular_ids, repeat=length):
            out.append(TokenSeq(tuple(combo), vocab))
    return out


def stationary_check(spec: EnergySpec, proposal: Proposal, vocab: Vocab, *,
                     steps: int, chains: int = 1, max_len: int = 3,
                     burn_in: int | None = None, seed: int = 0,
                     init_text: str = "", vocab_cap: int = 3,
                     len_cap: int = 3) -> float:
    """Total-variation distance between the chain and the exact target.

    The target is exp(-E) brute-force normalized over all sequences up to
    max_len; the chain is confined to that space by a high-energy length
    barrier (out-of-space candidates are effectively always rejected, which
    leaves the restricted target invariant). Strict mode only.
    """
    if vocab.size > vocab_cap or max_len > len_cap:
        raise ValueError(
            f"enumeration space too large: need |V| <= {vocab_cap} and "
            f"max_len <= {len_cap}, got |V|={vocab.size}, max_len={max_len}")
    space = enumerate_space(vocab, max_len)
    energies = np.array([total_energy(spec, s) for s in space])
    weights = np.exp(-(energies - energies.min()))
    target = weights / weights.sum()

    barrier = EnergyTerm(
        "length-barrier", 1.0,
        lambda s, cap=max_len: 0.0 if len(s) <= cap else BARRIER_ENERGY)
    walled = spec.with_extra(barrier)

    if burn_in is None:
        burn_in = max(1, steps // 10)
    init = tokenize(init_text, vocab)
    counts: dict[tuple[int, ...], int] = {}
    total = 0
    for chain_id in range(chains):
        rng = np.random.default_rng([seed, chain_id])
        st = ChainState(seq=init, energy=total_energy(walled, init), rng=rng,
                        chain_id=chain_id)
        for t in range(steps):
            step(st, proposal, walled, "strict", allow_empty=True)
            if t + 1 > burn_in:
                counts[st.seq.ids] = counts.get(st.seq.ids, 0) + 1
                total += 1
    empirical = np.array([counts.get(s.ids, 0) / total for s in space])
    return 0.5 * float(np.abs(empirical - target).sum())
