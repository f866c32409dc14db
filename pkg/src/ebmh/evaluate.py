"""Downstream metrics, significance testing, and the intrinsic sampler check.

The headline downstream metric is the mean over test items of
ACC * SIM * FL: a transfer counts only when the style flipped (ACC) and the
output is fluent (FL), in which case it contributes its similarity to the
ground-truth transfer (SIM). The intrinsic harness compares MH samplers
against exact ancestral draws from a tractable target, reporting energy
statistics per forward-pass budget.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .energy import EnergySpec, SimilarityScorer, StyleClassifier, total_energy
from .engine import MHConfig, run_batch
from .ngram import NgramModel
from .seq import TokenSeq, tokenize


@dataclass(frozen=True)
class EvalRecord:
    source: TokenSeq
    output: TokenSeq
    target: TokenSeq
    acc: int
    fl: int
    sim: float

    def __post_init__(self):
        if self.acc not in (0, 1) or self.fl not in (0, 1):
            raise ValueError("acc and fl must be binary")
        if not (0.0 <= self.sim <= 1.0):
            raise ValueError("sim must lie in [0, 1]")


def j_score(records: Sequence[EvalRecord]) -> float:
    """Mean of acc * sim * fl over the records."""
    if not records:
        raise ValueError("empty record list")
    return sum(r.acc * r.sim * r.fl for r in records) / len(records)


def make_fluency_judge(model: NgramModel, tau: float) -> Callable[[TokenSeq], bool]:
    """Pass iff mean per-event NLL under the fluency model is below tau.

    Sequences are rebased onto the model's own vocabulary by text, so judged
    outputs may come from any tokenization.
    """

    def judge_fl(seq: TokenSeq) -> bool:
        if seq.vocab is not model.vocab:
            seq = tokenize(seq.text, model.vocab)
        return -model.log_prob(seq) / (len(seq) + 1) < tau

    return judge_fl


def calibrate_fluency_tau(model: NgramModel, corpus: Sequence[TokenSeq],
                          quantile: float = 0.9) -> float:
    """Threshold at which the given fraction of the corpus passes."""
    if not corpus:
        raise ValueError("empty corpus")
    nlls = sorted(-model.log_prob(s) / (len(s) + 1) for s in corpus)
    idx = min(len(nlls) - 1, max(0, math.ceil(quantile * len(nlls)) - 1))
    return nlls[idx] + 1e-9


def judge(output: TokenSeq, source: TokenSeq, target: TokenSeq,
          acc_clf: StyleClassifier, fl_judge: Callable[[TokenSeq], bool],
          sim_scorer: SimilarityScorer, *, target_label: str) -> EvalRecord:
    """Score one output: style posterior strictly above 0.5 counts as a
    transfer, similarity is measured against the ground truth."""
    acc = 1 if acc_clf.posterior(output, target_label) > 0.5 else 0
    fl = 1 if fl_judge(output) else 0
    sim = sim_scorer.score(output, target)
    return EvalRecord(source=source, output=output, target=target,
                      acc=acc, fl=fl, sim=sim)


# ------------------------------------------------------------------ bootstrap


def paired_bootstrap(records_a: Sequence[EvalRecord], records_b: Sequence[EvalRecord],
                     metric: Callable[[Sequence[EvalRecord]], float] = j_score,
                     resamples: int = 10000, alpha: float = 0.05,
                     seed: int = 0) -> dict:
    """Paired bootstrap test of metric(A) > metric(B).

    Items are resampled with replacement, jointly for both systems. The
    p-value is the fraction of resamples where A fails to beat B; ties count
    against A, so identical systems are never significant.
    """
    if len(records_a) != len(records_b):
        raise ValueError(
            f"paired records length mismatch: {len(records_a)} vs {len(records_b)}")
    if not records_a:
        raise ValueError("empty record list")
    if resamples < 1000:
        raise ValueError("resamples must be >= 1000")
    n = len(records_a)
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n, size=(resamples, n))
    if metric is j_score:
        va = np.array([r.acc * r.sim * r.fl for r in records_a])
        vb = np.array([r.acc * r.sim * r.fl for r in records_b])
        wins = va[idx].mean(axis=1) > vb[idx].mean(axis=1)
        losses_or_ties = int(resamples - wins.sum())
    else:
        losses_or_ties = 0
        for row in idx:
            ma = metric([records_a[i] for i in row])
            mb = metric([records_b[i] for i in row])
            if ma <= mb:
                losses_or_ties += 1
    p_value = losses_or_ties / resamples
    return {
        "p_value": p_value,
        "significant": p_value < alpha,
        "alpha": alpha,
        "resamples": resamples,
        "metric_a": metric(records_a),
        "metric_b": metric(records_b),
    }


# ------------------------------------------------------------------ intrinsic


@dataclass
class SamplerStats:
    name: str
    energies: list[float]
    forward_passes: int
    truncated: int = 0

    @property
    def mean(self) -> float:
        return float(np.mean(self.energies))

    @property
    def stddev(self) -> float:
        return float(np.std(self.energies))

    def to_dict(self) -> dict:
        return {
            "name": self.name,
            "n": len(self.energies),
            "mean_energy": self.mean,
            "stddev_energy": self.stddev,
            "forward_passes": self.forward_passes,
            "truncated": self.truncated,
            "energies": self.energies,
        }


@dataclass
class IntrinsicReport:
    exact: SamplerStats
    samplers: list[SamplerStats] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {"exact": self.exact.to_dict(),
                "samplers": [s.to_dict() for s in self.samplers]}

    def histogram_rows(self) -> list[tuple[str, int, float]]:
        rows = [("exact", i, e) for i, e in enumerate(self.exact.energies)]
        for st in self.samplers:
            rows.extend((st.name, i, e) for i, e in enumerate(st.energies))
        return rows


def intrinsic_eval(target: EnergySpec, model: NgramModel,
                   samplers: Sequence[tuple[str, MHConfig]], exact_n: int,
                   seed: int = 0) -> IntrinsicReport:
    """Compare MH samplers against exact ancestral draws from the target.

    The target energy must be the negative log-likelihood of ``model`` so
    that ancestral sampling is exact. Each sampler contributes one output
    per chain (its final state); its forward-pass budget is steps * chains.
    """
    if exact_n < 1:
        raise ValueError("exact_n must be >= 1")
    rng = np.random.default_rng([seed, 0])
    exact_energies: list[float] = []
    truncated = 0
    for _ in range(exact_n):
        sample = model.ancestral_sample(rng)
        truncated += int(sample.truncated)
        exact_energies.append(total_energy(target, sample.seq))
    report = IntrinsicReport(
        exact=SamplerStats("exact", exact_energies, forward_passes=exact_n,
                           truncated=truncated))

    for name, cfg in samplers:
        result = run_batch(cfg)
        energies = [st.energy for st in result.chains if not st.failed]
        report.samplers.append(SamplerStats(
            name, energies, forward_passes=cfg.steps * cfg.batch_size))
    return report
