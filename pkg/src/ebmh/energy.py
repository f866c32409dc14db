"""Energy terms and the weighted product-of-experts combiner.

An energy spec is a weighted sum of black-box potentials over token
sequences; lower energy means higher (unnormalized) probability. The
built-in potentials are an n-gram negative log-likelihood, a naive Bayes
style discriminator, and an inverse token-overlap similarity against a
fixed seed sentence. Arbitrary external potentials attach through the
adapter protocol.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Mapping, Sequence

from .seq import TokenSeq

OOV = "<oov>"


class EnergyError(Exception):
    """A term evaluator failed; the message names the term."""


@dataclass(frozen=True)
class EnergyTerm:
    name: str
    weight: float
    evaluator: Callable[[TokenSeq], float] = field(compare=False)

    def __post_init__(self):
        if not math.isfinite(self.weight):
            raise ValueError(f"term '{self.name}': weight must be finite")


@dataclass(frozen=True)
class EnergySpec:
    terms: tuple[EnergyTerm, ...]
    seed_text: TokenSeq | None = None

    def __post_init__(self):
        object.__setattr__(self, "terms", tuple(self.terms))
        if not self.terms:
            raise ValueError("energy spec needs at least one term")

    def with_extra(self, *extra: EnergyTerm) -> "EnergySpec":
        return EnergySpec(self.terms + tuple(extra), self.seed_text)


def total_energy(spec: EnergySpec, seq: TokenSeq) -> float:
    """Weighted sum of all term energies; always finite on success."""
    total = 0.0
    for term in spec.terms:
        if term.weight == 0.0:
            continue
        try:
            value = float(term.evaluator(seq))
        except Exception as exc:
            raise EnergyError(f"energy term '{term.name}' failed: {exc}") from exc
        if not math.isfinite(value):
            raise EnergyError(f"energy term '{term.name}' returned non-finite value {value}")
        total += term.weight * value
    return total


# ------------------------------------------------------------------ classifier


class StyleClassifier:
    """Two-class naive Bayes over unigrams and bigrams with add-k smoothing.

    Per-class likelihood tables are stored as log-probabilities over a shared
    feature support plus an OOV bucket, so each table sums to exactly one and
    posteriors are always interior.
    """

    def __init__(self, labels: Sequence[str], priors: Mapping[str, float],
                 unigram_logp: Mapping[str, Mapping[str, float]],
                 bigram_logp: Mapping[str, Mapping[str, float]] | None = None,
                 lowercase: bool = False, smoothing: float = 1.0):
        if len(labels) != 2:
            raise ValueError("classifier needs exactly two labels")
        self.labels = tuple(labels)
        self.priors = {lb: float(priors[lb]) for lb in self.labels}
        self.unigram_logp = {lb: dict(unigram_logp[lb]) for lb in self.labels}
        self.bigram_logp = (
            {lb: dict(bigram_logp[lb]) for lb in self.labels} if bigram_logp else None
        )
        self.lowercase = bool(lowercase)
        self.smoothing = float(smoothing)
        for lb in self.labels:
            if OOV not in self.unigram_logp[lb]:
                raise ValueError(f"unigram table for '{lb}' lacks the {OOV} bucket")
            if self.bigram_logp and OOV not in self.bigram_logp[lb]:
                raise ValueError(f"bigram table for '{lb}' lacks the {OOV} bucket")

    @staticmethod
    def _features(tokens: Sequence[str]) -> tuple[list[str], list[str]]:
        unis = list(tokens)
        bis = [f"{a} {b}" for a, b in zip(tokens, tokens[1:])]
        return unis, bis

    def _tokens_of(self, x: TokenSeq | Sequence[str]) -> list[str]:
        toks = list(x.tokens) if isinstance(x, TokenSeq) else [str(t) for t in x]
        if self.lowercase:
            toks = [t.lower() for t in toks]
        return toks

    def class_logscore(self, x: TokenSeq | Sequence[str], label: str) -> float:
        toks = self._tokens_of(x)
        unis, bis = self._features(toks)
        table = self.unigram_logp[label]
        score = math.log(self.priors[label])
        floor = table[OOV]
        for f in unis:
            score += table.get(f, floor)
        if self.bigram_logp is not None:
            btable = self.bigram_logp[label]
            bfloor = btable[OOV]
            for f in bis:
                score += btable.get(f, bfloor)
        return score

    def posterior(self, x: TokenSeq | Sequence[str], label: str) -> float:
        """p(label | x) by Bayes rule over the two classes."""
        if label not in self.labels:
            raise ValueError(f"unknown label '{label}'")
        scores = [self.class_logscore(x, lb) for lb in self.labels]
        m = max(scores)
        z = sum(math.exp(s - m) for s in scores)
        return math.exp(scores[self.labels.index(label)] - m) / z

    # ------------------------------------------------------------- training

    @classmethod
    def train(cls, corpus_by_class: Mapping[str, Sequence[TokenSeq | str]],
              smoothing: float = 1.0, lowercase: bool = False,
              priors: Mapping[str, float] | None = None) -> "StyleClassifier":
        """Train from two token corpora; deterministic for fixed inputs.

        ``corpus_by_class`` maps each label to its sentences (TokenSeq or raw
        strings, which are whitespace-split). Priors default to uniform.
        """
        labels = tuple(corpus_by_class)
        if len(labels) != 2:
            raise ValueError("classifier needs exactly two classes")
        for lb in labels:
            if not corpus_by_class[lb]:
                raise ValueError(f"missing class corpus for '{lb}'")
        if not (smoothing > 0):
            raise ValueError("smoothing must be > 0")

        def toks(item) -> list[str]:
            out = list(item.tokens) if isinstance(item, TokenSeq) else str(item).split()
            return [t.lower() for t in out] if lowercase else out

        uni_counts = {lb: {} for lb in labels}
        bi_counts = {lb: {} for lb in labels}
        for lb in labels:
            for item in corpus_by_class[lb]:
                t = toks(item)
                unis, bis = cls._features(t)
                for f in unis:
                    uni_counts[lb][f] = uni_counts[lb].get(f, 0) + 1
                for f in bis:
                    bi_counts[lb][f] = bi_counts[lb].get(f, 0) + 1

        def smooth(counts: dict[str, dict[str, int]]) -> dict[str, dict[str, float]]:
            support = sorted(set().union(*(counts[lb] for lb in labels)))
            out: dict[str, dict[str, float]] = {}
            for lb in labels:
                total = sum(counts[lb].values())
                denom = total + smoothing * (len(support) + 1)
                table = {f: math.log((counts[lb].get(f, 0) + smoothing) / denom)
                         for f in support}
                table[OOV] = math.log(smoothing / denom)
                out[lb] = table
            return out

        pri = dict(priors) if priors else {lb: 0.5 for lb in labels}
        return cls(labels, pri, smooth(uni_counts), smooth(bi_counts),
                   lowercase=lowercase, smoothing=smoothing)

    # ------------------------------------------------------------ serialize

    def to_dict(self) -> dict:
        return {
            "labels": list(self.labels),
            "priors": self.priors,
            "smoothing": self.smoothing,
            "lowercase": self.lowercase,
            "unigram_logp": self.unigram_logp,
            "bigram_logp": self.bigram_logp,
        }

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), ensure_ascii=False, indent=2, sort_keys=True) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def from_dict(cls, obj: dict) -> "StyleClassifier":
        return cls(obj["labels"], obj["priors"], obj["unigram_logp"],
                   obj.get("bigram_logp"), lowercase=obj.get("lowercase", False),
                   smoothing=obj.get("smoothing", 1.0))

    @classmethod
    def load(cls, path: str | Path) -> "StyleClassifier":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


def train_classifier(corpus_by_class: Mapping[str, Sequence[TokenSeq | str]],
                     smoothing: float = 1.0, lowercase: bool = False) -> StyleClassifier:
    return StyleClassifier.train(corpus_by_class, smoothing=smoothing, lowercase=lowercase)


def disc_energy(clf: StyleClassifier, seq: TokenSeq, target_label: str) -> float:
    """Negative log posterior of the target label; smoothing keeps it finite."""
    return -math.log(clf.posterior(seq, target_label))


# ------------------------------------------------------------------ similarity


class SimilarityScorer:
    """Token-level F1 with exact-match multiset alignment; range [0, 1].

    F1 = 2 * |multiset intersection| / (len(a) + len(b)); symmetric, and 1
    exactly when the token multisets match (in particular score(x, x) = 1
    for non-empty x). An empty side scores 0.
    """

    kind = "builtin-token-f1"

    def score(self, a: TokenSeq, b: TokenSeq) -> float:
        if len(a) == 0 or len(b) == 0:
            return 0.0
        ca: dict[str, int] = {}
        for t in a.tokens:
            ca[t] = ca.get(t, 0) + 1
        common = 0
        for t in b.tokens:
            if ca.get(t, 0) > 0:
                ca[t] -= 1
                common += 1
        return 2.0 * common / (len(a) + len(b))


def sim_energy(scorer: SimilarityScorer, seed: TokenSeq, seq: TokenSeq,
               mapping: str = "linear") -> float:
    """Inverse similarity against the seed sentence.

    mapping 'linear' gives 1 - score; 'neglog' gives -log(score) with the
    score floored at 1e-9 to stay finite.
    """
    if len(seed) == 0:
        raise ValueError("similarity seed must be non-empty")
    s = scorer.score(seed, seq)
    if mapping == "linear":
        return 1.0 - s
    if mapping == "neglog":
        return -math.log(max(s, 1e-9))
    raise ValueError(f"unknown similarity mapping '{mapping}'")


# ------------------------------------------------------------------ spec files


def load_energy_spec(obj: dict | str | Path, vocab, base_dir: str | Path = ".",
                     client_factory=None) -> EnergySpec:
    """Build an EnergySpec from its JSON form.

    Relative paths inside the spec resolve against ``base_dir``. Term kinds:
    'ngram-nll' (params: model), 'disc' (params: classifier, target_label),
    'sim' (params: mapping), 'adapter' (params: term, optional endpoint).
    ``client_factory(endpoint_or_none)`` must return an adapter client when
    adapter terms are present.
    """
    from .ngram import NgramModel
    from .seq import tokenize

    base = Path(base_dir)
    if isinstance(obj, (str, Path)):
        p = Path(obj)
        if not p.is_absolute():
            p = base / p
        obj = json.loads(p.read_text(encoding="utf-8"))
        base = p.parent

    def respath(v: str) -> Path:
        p = Path(v)
        return p if p.is_absolute() else base / p

    seed = None
    if obj.get("seed_text"):
        seed = tokenize(obj["seed_text"], vocab)

    terms: list[EnergyTerm] = []
    for i, t in enumerate(obj.get("terms", [])):
        name = t.get("name", f"term{i}")
        weight = float(t.get("weight", 1.0))
        kind = t.get("kind")
        params = t.get("params", {})
        if kind == "ngram-nll":
            model = NgramModel.load(respath(params["model"]), vocab)
            terms.append(EnergyTerm(name, weight, lambda s, m=model: -m.log_prob(s)))
        elif kind == "disc":
            clf = StyleClassifier.load(respath(params["classifier"]))
            label = params["target_label"]
            terms.append(EnergyTerm(name, weight,
                                    lambda s, c=clf, lb=label: disc_energy(c, s, lb)))
        elif kind == "sim":
            if seed is None:
                raise ValueError(f"terms[{i}]: 'sim' term requires seed_text")
            mapping = params.get("mapping", "linear")
            scorer = SimilarityScorer()
            terms.append(EnergyTerm(
                name, weight,
                lambda s, sc=scorer, sd=seed, mp=mapping: sim_energy(sc, sd, s, mp)))
        elif kind == "adapter":
            if client_factory is None:
                raise ValueError(f"terms[{i}]: adapter term but no client factory")
            client = client_factory(params.get("endpoint"))
            remote_term = params.get("term", name)
            terms.append(EnergyTerm(
                name, weight,
                lambda s, c=client, rt=remote_term: c.energy(s.text, rt)["energy"]))
        else:
            raise ValueError(f"terms[{i}]: unknown energy term kind '{kind}'")
    return EnergySpec(tuple(terms), seed)
