"""Tokenization and model input layout.

The tokenizer splits code into identifiers, numbers and single punctuation
characters. A Vocabulary either maps tokens explicitly (unknowns become UNK)
or hashes them into a fixed id range (the hashing trick), so no trained
vocabulary file is required.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from pathlib import Path

from evd.kernel import hashed_ids

BOS, SEP, EOS, CLS, VULN, NOTVULN, PAD, UNK = range(8)
N_SPECIAL = 8
SPECIAL_NAMES = ("BOS", "SEP", "EOS", "CLS", "VULN", "NOTVULN", "PAD", "UNK")

_TOKEN_RE = re.compile(r"[A-Za-z_][A-Za-z0-9_]*|\d+(?:\.\d+)?|[^\sA-Za-z0-9_]")

VOCAB_FORMAT_VERSION = 1


class EncoderError(Exception):
    pass


@dataclass(frozen=True)
class Vocabulary:
    """Token-to-id map with reserved special ids 0..7.

    With ``hashed=True`` (the default) every token hashes into
    [N_SPECIAL, size); with an explicit ``tokens`` map, unknown tokens map
    to UNK.
    """

    size: int = 2**18
    max_sequence_length: int = 512
    hashed: bool = True
    tokens: tuple[str, ...] = ()

    def __post_init__(self):
        if self.size <= N_SPECIAL:
            raise ValueError("vocabulary size must exceed the special id range")
        if not self.hashed and N_SPECIAL + len(self.tokens) > self.size:
            raise ValueError("explicit token list does not fit the vocabulary size")
        if self.max_sequence_length < 4:
            raise ValueError("max_sequence_length must admit [BOS] x [SEP] [EOS]")
        if not self.hashed:
            object.__setattr__(
                self,
                "_explicit",
                {tok: N_SPECIAL + i for i, tok in enumerate(self.tokens)},
            )

    def ids_for(self, tokens: list[str]) -> list[int]:
        if self.hashed:
            return hashed_ids(tokens, self.size - N_SPECIAL, N_SPECIAL)
        table = self._explicit
        return [table.get(tok, UNK) for tok in tokens]


@dataclass(frozen=True)
class EncodedSequence:
    """Classifier layout: [BOS] context [SEP] block [EOS]."""

    ids: tuple[int, ...]
    n_context: int
    n_block: int

    def __post_init__(self):
        expected = (
            (BOS,)
            + self.ids[1 : 1 + self.n_context]
            + (SEP,)
            + self.ids[2 + self.n_context : 2 + self.n_context + self.n_block]
            + (EOS,)
        )
        if self.ids != expected:
            raise ValueError("ids do not follow the [BOS] c [SEP] v [EOS] layout")

    @property
    def context_ids(self) -> tuple[int, ...]:
        return self.ids[1 : 1 + self.n_context]

    @property
    def block_ids(self) -> tuple[int, ...]:
        return self.ids[2 + self.n_context : 2 + self.n_context + self.n_block]


def split_tokens(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


def tokenize(text: str, vocabulary: Vocabulary) -> list[int]:
    return vocabulary.ids_for(split_tokens(text))


def encode_classifier(context: str, block: str, vocabulary: Vocabulary) -> EncodedSequence:
    """Encode a (context, block) pair; over budget, context loses tokens from
    its left before the block loses tokens from its right."""
    ctx = tokenize(context, vocabulary)
    blk = tokenize(block, vocabulary)
    budget = vocabulary.max_sequence_length - 3
    overflow = len(ctx) + len(blk) - budget
    if overflow > 0:
        drop = min(overflow, len(ctx))
        ctx = ctx[drop:]
        overflow -= drop
    if overflow > 0:
        blk = blk[: len(blk) - overflow]
    ids = (BOS, *ctx, SEP, *blk, EOS)
    return EncodedSequence(ids=ids, n_context=len(ctx), n_block=len(blk))


def encode_decoder(context: str, block: str, vocabulary: Vocabulary) -> list[int]:
    """Decoder layout: [BOS] context block [CLS]; target comes separately."""
    ctx = tokenize(context, vocabulary)
    blk = tokenize(block, vocabulary)
    budget = vocabulary.max_sequence_length - 2
    overflow = len(ctx) + len(blk) - budget
    if overflow > 0:
        drop = min(overflow, len(ctx))
        ctx = ctx[drop:]
        overflow -= drop
    if overflow > 0:
        blk = blk[: len(blk) - overflow]
    return [BOS, *ctx, *blk, CLS]


def decoder_target(label) -> int:
    return VULN if label.is_vulnerable else NOTVULN


def save_vocabulary(path: str | Path, vocab: Vocabulary):
    with Path(path).open("w", encoding="utf-8") as fh:
        fh.write(f"version {VOCAB_FORMAT_VERSION}\n")
        fh.write(f"size {vocab.size}\n")
        fh.write(f"max_sequence_length {vocab.max_sequence_length}\n")
        fh.write(f"hashed {int(vocab.hashed)}\n")
        for i, name in enumerate(SPECIAL_NAMES):
            fh.write(f"special {name} {i}\n")
        for tok in vocab.tokens:
            fh.write(f"token {tok}\n")


def load_vocabulary(path: str | Path) -> Vocabulary:
    header: dict[str, str] = {}
    tokens = []
    with Path(path).open(encoding="utf-8") as fh:
        for line in fh:
            line = line.rstrip("\n")
            if not line:
                continue
            key, _, rest = line.partition(" ")
            if key == "token":
                tokens.append(rest)
            elif key == "special":
                name, _, idx = rest.partition(" ")
                if SPECIAL_NAMES.index(name) != int(idx):
                    raise EncoderError(f"special id mismatch for {name}")
            else:
                header[key] = rest
    if int(header.get("version", -1)) != VOCAB_FORMAT_VERSION:
        raise EncoderError(f"unsupported vocabulary version: {header.get('version')}")
    return Vocabulary(
        size=int(header["size"]),
        max_sequence_length=int(header["max_sequence_length"]),
        hashed=bool(int(header["hashed"])),
        tokens=tuple(tokens),
    )
