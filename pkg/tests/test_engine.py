import math
from dataclasses import asdict

import numpy as np
import pytest

from ebmh.energy import EnergySpec, EnergyTerm
from ebmh.engine import (ChainState, MHConfig, accept_prob, run_batch,
                         stationary_check, step, write_trace_ndjson)
from ebmh.ngram import NgramModel
from ebmh.proposal import ProposalError, ProposalRecord, SpanBlockProposal, SpanCfg
from ebmh.seq import TokenSeq, Vocab, tokenize


@pytest.fixture
def vocab():
    return Vocab(["a", "b"])


@pytest.fixture
def model(vocab):
    return NgramModel.train(
        [tokenize(t, vocab) for t in ("a b a b", "b a", "a a b")], order=2, k=1.0)


def length_spec(weight=1.0):
    return EnergySpec((EnergyTerm("len", weight, lambda s: float(len(s))),))


def rec(seq, fwd, rev, ident=None, is_identity=False):
    return ProposalRecord(seq, logq_forward=fwd, logq_reverse=rev,
                          logq_identity=ident, is_identity=is_identity)


# ------------------------------------------------------------------ accept_prob


def test_accept_symmetric_null(vocab):
    r = rec(tokenize("a", vocab), -2.0, -2.0)
    assert accept_prob(1.3, 1.3, r) == 1.0


def test_accept_downhill_clamps_to_one(vocab):
    r = rec(tokenize("a", vocab), -4.0, -4.0)
    assert accept_prob(2.0, 1.5, r) == 1.0  # min(1, e^{0.5})


def test_accept_uphill_energy_ratio(vocab):
    r = rec(tokenize("a", vocab), -3.0, -3.0)
    assert abs(accept_prob(1.0, 2.0, r) - math.exp(-1.0)) < 1e-12


def test_accept_identity_variant_cancellation(vocab):
    # logq_identity equals logq_forward, so only the energy ratio remains
    r = rec(tokenize("a", vocab), -3.0, -50.0, ident=-3.0)
    assert abs(accept_prob(1.0, 2.0, r, mode="identity-variant")
               - math.exp(-1.0)) < 1e-12


def test_accept_shift_invariance_1000(vocab):
    rng = np.random.default_rng(17)
    s = tokenize("a", vocab)
    for _ in range(1000):
        e_cur, e_cand = rng.normal(scale=3, size=2)
        fwd, rev = -np.abs(rng.normal(scale=4, size=2))
        c = rng.normal(scale=10)
        r = rec(s, float(fwd), float(rev))
        assert abs(accept_prob(e_cur + c, e_cand + c, r)
                   - accept_prob(e_cur, e_cand, r)) < 1e-12


def test_accept_validation(vocab):
    s = tokenize("a", vocab)
    with pytest.raises(ValueError, match="non-finite"):
        accept_prob(float("nan"), 1.0, rec(s, -1.0, -1.0))
    with pytest.raises(ValueError, match="logq_identity"):
        accept_prob(1.0, 1.0, rec(s, -1.0, -1.0), mode="identity-variant")
    with pytest.raises(ValueError, match="mode"):
        accept_prob(1.0, 1.0, rec(s, -1.0, -1.0), mode="bogus")


def test_accept_extreme_gap_clamped(vocab):
    r = rec(tokenize("a", vocab), -1.0, -1.0)
    assert accept_prob(0.0, 1e9, r) == math.exp(-700.0)
    assert accept_prob(1e9, 0.0, r) == 1.0


# ------------------------------------------------------------------ step


class IdentityProposal:
    def __call__(self, seq, rng):
        return ProposalRecord(seq, -1.0, -1.0, logq_identity=-1.0, is_identity=True)


class FailingProposal:
    def __call__(self, seq, rng):
        raise ProposalError("adapter unreachable")


def make_state(vocab, spec, text="a b", seed=0):
    seq = tokenize(text, vocab)
    from ebmh.energy import total_energy

    return ChainState(seq=seq, energy=total_energy(spec, seq),
                      rng=np.random.default_rng(seed))


def test_identity_proposal_always_accepted(vocab):
    spec = length_spec()
    st = make_state(vocab, spec)
    for _ in range(25):
        step(st, IdentityProposal(), spec, "strict")
    assert st.accepts == 25 and st.step == 25
    assert st.seq.text == "a b"


def test_huge_energy_gap_never_adopted(vocab, model):
    spec = EnergySpec((EnergyTerm(
        "wall", 1.0, lambda s: 0.0 if s.text == "a b" else 1e9),))
    st = make_state(vocab, spec)
    for _ in range(200):
        step(st, SpanBlockProposal(model, SpanCfg(2, 2)), spec, "strict")
    assert st.seq.text == "a b"


def test_step_error_counts_as_rejected(vocab):
    spec = length_spec()
    st = make_state(vocab, spec)
    step(st, FailingProposal(), spec, "strict", on_error="reject")
    assert st.step == 1 and st.accepts == 0 and len(st.errors) == 1
    with pytest.raises(ProposalError):
        step(st, FailingProposal(), spec, "strict", on_error="abort")


def test_trace_bookkeeping(vocab, model):
    spec = length_spec(0.3)
    st = make_state(vocab, spec, seed=5)
    entries = []
    for _ in range(300):
        step(st, SpanBlockProposal(model, SpanCfg(2, 2)), spec, "strict",
             trace_sink=entries.append)
    assert st.accepts == sum(e.accepted for e in entries)
    for e in entries:
        assert 0.0 <= e.accept_prob <= 1.0
    for prev, cur in zip(entries, entries[1:]):
        if prev.accepted:
            assert cur.energy_current == prev.energy_candidate
        else:
            assert cur.energy_current == prev.energy_current


def test_empty_candidate_rejected_when_disallowed(vocab, model):
    spec = EnergySpec((EnergyTerm("neg-len", 1.0, lambda s: float(len(s))),))
    st = make_state(vocab, spec, text="a", seed=1)
    for _ in range(300):
        step(st, SpanBlockProposal(model, SpanCfg(3, 3)), spec, "strict",
             allow_empty=False)
        assert len(st.seq) > 0


# ------------------------------------------------------------------ run_batch


def base_cfg(vocab, model, spec, **kw):
    args = dict(steps=20, init_text="a b", vocab=vocab, energy=spec,
                proposal=SpanBlockProposal(model, SpanCfg(2, 2)),
                batch_size=4, mode="strict", seed=123)
    args.update(kw)
    return MHConfig(**args)


def test_run_batch_single_chain_best(vocab, model):
    cfg = base_cfg(vocab, model, length_spec(), batch_size=1)
    result = run_batch(cfg)
    assert result.best_chain == 0
    assert result.best.ids == result.chains[0].seq.ids
    assert result.best_energy == result.chains[0].energy


def test_run_batch_best_is_argmin(vocab, model):
    result = run_batch(base_cfg(vocab, model, length_spec(), batch_size=6))
    energies = [st.energy for st in result.chains]
    assert result.best_energy == min(energies)
    assert result.best_chain == energies.index(min(energies))  # lowest id wins ties


def test_run_batch_deterministic(vocab, model):
    cfg1 = base_cfg(vocab, model, length_spec())
    cfg2 = base_cfg(vocab, model, length_spec())
    r1, r2 = run_batch(cfg1), run_batch(cfg2)
    assert [asdict(e) for e in r1.traces] == [asdict(e) for e in r2.traces]
    assert r1.summary() == r2.summary()


def test_run_batch_constant_shift_keeps_best(vocab, model):
    spec = length_spec()
    shifted = spec.with_extra(EnergyTerm("const", 2.0, lambda s: 5.0))
    r1 = run_batch(base_cfg(vocab, model, spec))
    r2 = run_batch(base_cfg(vocab, model, shifted))
    assert r1.best_chain == r2.best_chain
    assert r1.best.ids == r2.best.ids
    assert abs(r2.best_energy - (r1.best_energy + 10.0)) < 1e-9


def test_run_batch_validation(vocab, model):
    with pytest.raises(ValueError, match="steps"):
        run_batch(base_cfg(vocab, model, length_spec(), steps=0))
    with pytest.raises(ValueError, match="mode"):
        run_batch(base_cfg(vocab, model, length_spec(), mode="loose"))
    with pytest.raises(ValueError, match="empty"):
        run_batch(base_cfg(vocab, model, length_spec(), init_text=""))


def test_run_batch_abort_isolates_chains(vocab):
    class FailOnce:
        def __init__(self):
            self.calls = 0

        def __call__(self, seq, rng):
            self.calls += 1
            if self.calls == 2:  # only the first chain ever hits this
                raise ProposalError("flaky")
            return ProposalRecord(seq, -1.0, -1.0, logq_identity=-1.0,
                                  is_identity=True)

    cfg = MHConfig(steps=5, init_text="a", vocab=vocab, energy=length_spec(),
                   proposal=FailOnce(), batch_size=3, mode="strict",
                   seed=0, on_error="abort")
    result = run_batch(cfg)
    assert result.chains[0].failed and result.chains[0].errors
    assert not result.chains[1].failed and not result.chains[2].failed
    assert not result.chains[result.best_chain].failed


def test_trace_ndjson_round_trip(tmp_path, vocab, model):
    import json

    result = run_batch(base_cfg(vocab, model, length_spec(), steps=5))
    path = tmp_path / "trace.ndjson"
    write_trace_ndjson(result.traces, path)
    lines = path.read_text().splitlines()
    assert len(lines) == 5 * 4
    first = json.loads(lines[0])
    assert list(first) == ["chain_id", "step", "candidate_text", "energy_current",
                           "energy_candidate", "logq_forward", "logq_reverse",
                           "logq_identity", "accept_prob", "accepted"]


# ------------------------------------------------------------------ stationary


def test_stationary_uniform_energy(vocab, model):
    spec = EnergySpec((EnergyTerm("const", 1.0, lambda s: 0.5),))
    tv = stationary_check(spec, SpanBlockProposal(model, SpanCfg(3, 3)), vocab,
                          steps=20000, chains=2, max_len=3, seed=0)
    assert tv < 0.05


def test_stationary_two_state_hand_target():
    # space {(), (a)} with energies (0, log 3): target (0.75, 0.25)
    v = Vocab(["a"])
    m = NgramModel.train([tokenize("a", v), tokenize("", v)], order=1, k=1.0)
    spec = EnergySpec((EnergyTerm(
        "hand", 1.0, lambda s: 0.0 if len(s) == 0 else math.log(3.0)),))
    tv = stationary_check(spec, SpanBlockProposal(m, SpanCfg(1, 1)), v,
                          steps=20000, chains=2, max_len=1, seed=1)
    assert tv < 0.05


def test_stationary_degenerate_point_mass(vocab):
    # proposal supported only on the current state: the chain never moves,
    # so TV equals the distance between the init point mass and the target
    spec = EnergySpec((EnergyTerm("const", 1.0, lambda s: 0.0),))
    tv = stationary_check(spec, IdentityProposal(), vocab,
                          steps=2000, chains=1, max_len=1, seed=0, init_text="")
    # space {(), (a), (b)} uniform: TV = 0.5*(|1-1/3| + 1/3 + 1/3) = 2/3
    assert abs(tv - 2.0 / 3.0) < 1e-9


def test_stationary_space_cap(vocab):
    spec = EnergySpec((EnergyTerm("const", 1.0, lambda s: 0.0),))
    big = Vocab(["a", "b", "c", "d"])
    with pytest.raises(ValueError, match="too large"):
        stationary_check(spec, IdentityProposal(), big, steps=10, max_len=3)
    with pytest.raises(ValueError, match="too large"):
        stationary_check(spec, IdentityProposal(), vocab, steps=10, max_len=4)
