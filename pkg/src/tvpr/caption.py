"""Caption side: vocabulary, whitespace tokenization, text encoder.

The vocabulary assigns dense ids with three fixed specials (CLS=0, PAD=1,
UNK=2) followed by corpus tokens ordered by (count desc, token asc), so a
rebuild from the same corpus is always identical.  The encoder is a
bidirectional transformer over token + absolute position embeddings; padding
positions are masked out of attention, and the CLS output row is the caption
representation.
"""

from __future__ import annotations

import re
from collections import Counter
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import tensor as tn
from .errors import ConfigError
from .nn import TransformerEncoder
from .params import ParameterStore
from .tensor import Tensor

CLS_ID = 0
PAD_ID = 1
UNK_ID = 2
SPECIALS = ("[CLS]", "[PAD]", "[UNK]")

_TOKEN_CLEANER = re.compile(r"[^\w\s]")


def normalize_words(text: str) -> list[str]:
    """Lowercase, strip punctuation, split on whitespace."""
    return _TOKEN_CLEANER.sub(" ", text.lower()).split()


class Vocabulary:
    """Token-to-id map with dense ids and fixed special tokens."""

    def __init__(self, corpus_tokens: Sequence[tuple[str, int]]):
        """corpus_tokens: (token, count) pairs already ordered for assignment."""
        self.token_to_id: dict[str, int] = {tok: i for i, tok in enumerate(SPECIALS)}
        self.counts: dict[str, int] = {}
        for token, count in corpus_tokens:
            if token in self.token_to_id:
                raise ConfigError(f"token {token!r} collides with a special token")
            self.token_to_id[token] = len(self.token_to_id)
            self.counts[token] = count
        self.id_to_token = {i: t for t, i in self.token_to_id.items()}

    @property
    def size(self) -> int:
        return len(self.token_to_id)

    def lookup(self, token: str) -> int:
        return self.token_to_id.get(token, UNK_ID)

    # -- text file format: one "token<TAB>count" line per corpus token -------

    def dumps(self) -> str:
        lines = [f"{tok}\t{self.counts[tok]}"
                 for tok in list(self.token_to_id)[len(SPECIALS):]]
        return "\n".join(lines) + ("\n" if lines else "")

    def save(self, path: str | Path) -> None:
        Path(path).write_text(self.dumps(), encoding="utf-8")

    @classmethod
    def loads(cls, text: str) -> "Vocabulary":
        pairs = []
        for line in text.splitlines():
            if not line.strip():
                continue
            token, _, count = line.partition("\t")
            pairs.append((token, int(count or 0)))
        return cls(pairs)

    @classmethod
    def load(cls, path: str | Path) -> "Vocabulary":
        return cls.loads(Path(path).read_text(encoding="utf-8"))


def build_vocabulary(corpus: Iterable[str], min_count: int = 1) -> Vocabulary:
    """Count normalized tokens; keep those seen >= min_count times."""
    counts = Counter()
    empty = True
    for caption in corpus:
        empty = False
        counts.update(normalize_words(caption))
    if empty:
        raise ConfigError("cannot build a vocabulary from an empty corpus")
    kept = sorted(((t, c) for t, c in counts.items() if c >= min_count),
                  key=lambda tc: (-tc[1], tc[0]))
    return Vocabulary(kept)


def tokenize(text: str, vocab: Vocabulary, max_len: int) -> np.ndarray:
    """Fixed-length id sequence: [CLS, w_1..w_M, PAD...] of length 1+max_len."""
    words = normalize_words(text)[:max_len]
    ids = [CLS_ID] + [vocab.lookup(w) for w in words]
    ids += [PAD_ID] * (1 + max_len - len(ids))
    return np.asarray(ids, dtype=np.int64)


def attention_mask(ids: np.ndarray) -> np.ndarray:
    return np.asarray(ids) != PAD_ID


class CaptionEncoder:
    """Embedding tables + transformer; CLS row out."""

    def __init__(self, store: ParameterStore, vocab_size: int, d_txt: int,
                 max_len: int, num_layers: int, num_heads: int,
                 dropout: float = 0.0):
        self.d_txt = d_txt
        self.max_len = max_len
        self.token_table = store.add("caption/token_table", (vocab_size, d_txt))
        self.pos_table = store.add("caption/pos_table", (1 + max_len, d_txt))
        self.encoder = TransformerEncoder(store, "caption/encoder", d_txt,
                                          num_heads, num_layers, dropout)

    def __call__(self, ids: np.ndarray, train: bool = False,
                 rng: np.random.Generator | None = None) -> Tensor:
        """Encode an id batch (B, 1+max_len) to CLS embeddings (B, d_txt)."""
        ids = np.asarray(ids)
        if ids.ndim == 1:
            ids = ids[None, :]
        seq_len = ids.shape[1]
        if seq_len != 1 + self.max_len:
            raise ConfigError(
                f"token sequences must have length {1 + self.max_len}, got {seq_len}")
        x = tn.embedding_lookup(self.token_table, ids) + self.pos_table[0:seq_len]
        out = self.encoder(x, key_mask=attention_mask(ids), train=train, rng=rng)
        return out[:, 0]
