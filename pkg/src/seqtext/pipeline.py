"""Raw text to fixed-length index sequences.

Cleaning, whitespace tokenization, frequency-ranked vocabulary
construction, OOV replacement, pre-padding and tail truncation. Index 0
is always the pad, index 1 the OOV token; real tokens start at 2 and are
ordered by descending corpus frequency with lexicographic tie-break, so
construction is fully deterministic.
"""

from __future__ import annotations

import hashlib
import re
from collections import Counter
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, DataError

PAD_INDEX = 0
OOV_INDEX = 1

_NON_ALNUM = re.compile(r"[^0-9A-Za-z]+")


@dataclass(frozen=True)
class PipelineConfig:
    vocab_size: int = 10000
    max_len: int = 250
    lowercase: bool = True
    strip_nonalpha: bool = True
    stopwords: frozenset = frozenset()
    oov_token: str = "<UNK>"
    pad_token: str = "<PAD>"

    def __post_init__(self):
        if self.vocab_size < 3:
            raise ConfigError(f"vocab_size must be >= 3 (pad + OOV + one token), got {self.vocab_size}")
        if self.max_len < 1:
            raise ConfigError(f"max_len must be >= 1, got {self.max_len}")

    def to_dict(self) -> dict:
        return {
            "vocab_size": self.vocab_size,
            "max_len": self.max_len,
            "lowercase": self.lowercase,
            "strip_nonalpha": self.strip_nonalpha,
            "stopwords": sorted(self.stopwords),
            "oov_token": self.oov_token,
            "pad_token": self.pad_token,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "PipelineConfig":
        d = dict(d)
        d["stopwords"] = frozenset(d.get("stopwords") or ())
        return cls(**d)


@dataclass
class TokenizedDocument:
    indices: np.ndarray  # exactly max_len int32 entries
    label: int
    original_length: int


def clean(raw: str, cfg: PipelineConfig) -> list[str]:
    """Normalize raw text into a token list.

    Lowercases (if configured), replaces non-alphanumeric runs with
    separators (if configured), splits on whitespace and drops
    configured stopwords. Empty input gives an empty list.
    """
    text = raw.lower() if cfg.lowercase else raw
    if cfg.strip_nonalpha:
        text = _NON_ALNUM.sub(" ", text)
    tokens = text.split()
    if cfg.stopwords:
        tokens = [t for t in tokens if t not in cfg.stopwords]
    return tokens


def load_stopwords(path) -> frozenset:
    """One token per line; blank lines ignored."""
    with open(path, encoding="utf-8") as fh:
        return frozenset(line.strip() for line in fh if line.strip())


class Vocabulary:
    """Immutable token <-> dense-index mapping.

    Index 0 is the pad, 1 the OOV placeholder; indices 2.. hold the most
    frequent corpus tokens in descending frequency (ties lexicographic).
    """

    def __init__(self, tokens: list[str], frequencies: list[int]):
        if len(tokens) != len(frequencies):
            raise ConfigError("tokens and frequencies must align")
        self.index_to_token = list(tokens)
        self.frequencies = list(frequencies)
        self.token_to_index = {t: i for i, t in enumerate(tokens)}

    def __len__(self) -> int:
        return len(self.index_to_token)

    @property
    def size(self) -> int:
        return len(self.index_to_token)

    def index_of(self, token: str) -> int:
        return self.token_to_index.get(token, OOV_INDEX)

    def token_of(self, index: int) -> str:
        return self.index_to_token[index]

    def serialize(self) -> str:
        """Canonical text form: 'index<TAB>token<TAB>frequency' per line."""
        lines = [
            f"{i}\t{tok}\t{freq}"
            for i, (tok, freq) in enumerate(zip(self.index_to_token, self.frequencies))
        ]
        return "\n".join(lines) + "\n"

    def sha256(self) -> str:
        return hashlib.sha256(self.serialize().encode("utf-8")).hexdigest()

    def save(self, path) -> None:
        with open(path, "w", encoding="utf-8", newline="\n") as fh:
            fh.write(self.serialize())

    @classmethod
    def from_text(cls, text: str) -> "Vocabulary":
        tokens, freqs = [], []
        for n, line in enumerate(text.splitlines(), start=1):
            if not line:
                continue
            parts = line.split("\t")
            if len(parts) != 3:
                raise DataError(f"vocabulary line {n}: expected 3 tab-separated fields, got {len(parts)}")
            idx, tok, freq = parts
            try:
                idx = int(idx)
                freq = int(freq)
            except ValueError as exc:
                raise DataError(f"vocabulary line {n}: {exc}") from exc
            if idx != len(tokens):
                raise DataError(f"vocabulary line {n}: index {idx} not dense (expected {len(tokens)})")
            tokens.append(tok)
            freqs.append(freq)
        if len(tokens) < 2:
            raise DataError("vocabulary must contain at least pad and OOV entries")
        return cls(tokens, freqs)

    @classmethod
    def load(cls, path) -> "Vocabulary":
        with open(path, encoding="utf-8") as fh:
            return cls.from_text(fh.read())


def build_vocabulary(corpus, cfg: PipelineConfig) -> Vocabulary:
    """Rank tokens by corpus frequency and keep the top vocab_size - 2.

    `corpus` is an iterable of token sequences (the output of clean()).
    """
    counts = Counter()
    n_docs = 0
    for tokens in corpus:
        n_docs += 1
        counts.update(tokens)
    if n_docs == 0:
        raise ConfigError("cannot build a vocabulary from an empty corpus")
    ranked = sorted(counts.items(), key=lambda kv: (-kv[1], kv[0]))
    kept = ranked[: cfg.vocab_size - 2]
    tokens = [cfg.pad_token, cfg.oov_token] + [t for t, _ in kept]
    freqs = [0, 0] + [c for _, c in kept]
    return Vocabulary(tokens, freqs)


def encode(tokens, vocab: Vocabulary, cfg: PipelineConfig) -> np.ndarray:
    """Map tokens to indices, truncate the tail, pre-pad with zeros.

    Output always has exactly max_len entries.
    """
    ids = [vocab.index_of(t) for t in tokens[: cfg.max_len]]
    out = np.zeros(cfg.max_len, dtype=np.int32)
    if ids:
        out[cfg.max_len - len(ids):] = ids
    return out


def decode(indices, vocab: Vocabulary) -> list[str]:
    """Tokens for the non-pad suffix of an encoded document."""
    return [vocab.token_of(int(i)) for i in indices if int(i) != PAD_INDEX]


def make_document(tokens, label: int, vocab: Vocabulary, cfg: PipelineConfig) -> TokenizedDocument:
    return TokenizedDocument(
        indices=encode(tokens, vocab, cfg),
        label=label,
        original_length=len(tokens),
    )
