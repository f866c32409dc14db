"""Token sequences, vocabularies, and deterministic whitespace tokenization.

Everything downstream (models, energies, samplers) speaks TokenSeq. Both
Vocab and TokenSeq are immutable after construction, so they are safe to
share across concurrently running chains.
"""

from __future__ import annotations

import json
from collections import Counter
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable

BOS = "<s>"
EOS = "</s>"
UNK = "<unk>"

BOS_ID = 0
EOS_ID = 1
UNK_ID = 2

# Order must match the reserved ids above.
RESERVED = (BOS, EOS, UNK)
NUM_RESERVED = len(RESERVED)


class Vocab:
    """Bijective id<->token mapping with reserved BOS/EOS/UNK slots.

    Ids 0..2 are fixed for the BOS/EOS/UNK markers; regular tokens are
    numbered from 3 upward in the order supplied. ``lowercase`` records
    whether tokenization should casefold before lookup.
    """

    def __init__(self, tokens: Iterable[str], lowercase: bool = False, min_count: int = 1):
        toks = tuple(t for t in tokens if t not in RESERVED)
        if len(set(toks)) != len(toks):
            raise ValueError("duplicate tokens in vocabulary")
        if any((not t) or t.split() != [t] for t in toks):
            raise ValueError("tokens must be non-empty and free of whitespace")
        self.tokens: tuple[str, ...] = toks
        self.lowercase = bool(lowercase)
        self.min_count = int(min_count)
        self._ids = {t: i + NUM_RESERVED for i, t in enumerate(toks)}

    @property
    def size(self) -> int:
        """Number of regular (non-reserved) tokens."""
        return len(self.tokens)

    @property
    def regular_ids(self) -> range:
        return range(NUM_RESERVED, NUM_RESERVED + len(self.tokens))

    def id_of(self, token: str) -> int:
        """Map a token string to its id; unknown strings map to UNK."""
        got = self._ids.get(token)
        if got is not None:
            return got
        return UNK_ID

    def token_of(self, token_id: int) -> str:
        if 0 <= token_id < NUM_RESERVED:
            return RESERVED[token_id]
        return self.tokens[token_id - NUM_RESERVED]

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Vocab):
            return NotImplemented
        return (
            self.tokens == other.tokens
            and self.lowercase == other.lowercase
            and self.min_count == other.min_count
        )

    def __repr__(self) -> str:
        return f"Vocab(size={self.size}, lowercase={self.lowercase})"

    def to_dict(self) -> dict:
        return {
            "tokens": list(self.tokens),
            "lowercase": self.lowercase,
            "min_count": self.min_count,
        }

    @classmethod
    def from_dict(cls, obj: dict) -> "Vocab":
        return cls(obj["tokens"], lowercase=obj.get("lowercase", False),
                   min_count=obj.get("min_count", 1))

    def save(self, path: str | Path) -> None:
        Path(path).write_text(
            json.dumps(self.to_dict(), ensure_ascii=False, indent=2) + "\n",
            encoding="utf-8",
        )

    @classmethod
    def load(cls, path: str | Path) -> "Vocab":
        return cls.from_dict(json.loads(Path(path).read_text(encoding="utf-8")))


@dataclass(frozen=True)
class TokenSeq:
    """An ordered sequence of regular-token ids plus the vocab decoding it.

    Ids never contain BOS/EOS; UNK may appear. Equality and hashing use the
    ids only, so sequences are usable as dictionary keys.
    """

    ids: tuple[int, ...]
    vocab: Vocab = field(compare=False, repr=False)

    def __post_init__(self):
        top = NUM_RESERVED + self.vocab.size
        for i in self.ids:
            if i in (BOS_ID, EOS_ID) or not (0 <= i < top):
                raise ValueError(f"illegal token id {i} in sequence")

    @property
    def tokens(self) -> tuple[str, ...]:
        return tuple(self.vocab.token_of(i) for i in self.ids)

    @property
    def text(self) -> str:
        return " ".join(self.tokens)

    def __len__(self) -> int:
        return len(self.ids)

    def with_ids(self, ids: Iterable[int]) -> "TokenSeq":
        return TokenSeq(tuple(ids), self.vocab)


def tokenize(text: str, vocab: Vocab) -> TokenSeq:
    """Split on Unicode whitespace and map to ids (OOV becomes UNK).

    Total function: any string yields a TokenSeq, possibly empty.
    """
    parts = text.split()
    if vocab.lowercase:
        parts = [p.lower() for p in parts]
    return TokenSeq(tuple(vocab.id_of(p) for p in parts), vocab)


def detokenize(seq: TokenSeq) -> str:
    return seq.text


def build_vocab(corpus: Iterable[str], min_count: int = 1, lowercase: bool = False) -> Vocab:
    """Build a vocabulary of tokens with count >= min_count.

    Ordering is deterministic: by count descending, ties broken
    lexicographically. Reserved marker strings occurring in the corpus are
    ignored (they can never be regular tokens).
    """
    lines = list(corpus)
    if not lines:
        raise ValueError("empty corpus")
    counts: Counter[str] = Counter()
    for line in lines:
        parts = line.split()
        if lowercase:
            parts = [p.lower() for p in parts]
        counts.update(p for p in parts if p not in RESERVED)
    kept = [t for t, c in counts.items() if c >= min_count]
    kept.sort(key=lambda t: (-counts[t], t))
    return Vocab(kept, lowercase=lowercase, min_count=min_count)
