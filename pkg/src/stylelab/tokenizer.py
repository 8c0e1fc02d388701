"""Word-level tokenizer with reserved control ids.

Splits on whitespace, with every punctuation character its own token.
Ids 0..5 are reserved: pad, unk, bos, eos and the two placeholder tokens
the prompt builder overwrites with latent vectors.
"""

from __future__ import annotations

import json
import re
from pathlib import Path

from .errors import NotFoundError
from .util import write_text_atomic

_TOKEN_RE = re.compile(r"\w+|[^\w\s]")

PAD, UNK, BOS, EOS, PLH1, PLH2 = range(6)
RESERVED_TOKENS = ("<pad>", "<unk>", "<bos>", "<eos>", "<plh1>", "<plh2>")


def split_text(text: str) -> list[str]:
    return _TOKEN_RE.findall(text)


class Tokenizer:
    def __init__(self, words: list[str]):
        # deterministic layout: reserved block, then sorted unique words
        vocab = list(RESERVED_TOKENS)
        seen = set(vocab)
        for w in sorted(set(words)):
            if w not in seen:
                vocab.append(w)
                seen.add(w)
        self._id_to_token = vocab
        self._token_to_id = {t: i for i, t in enumerate(vocab)}

    @classmethod
    def build(cls, texts, extra_tokens=()) -> "Tokenizer":
        words = []
        for text in texts:
            words.extend(split_text(text))
        words.extend(extra_tokens)
        return cls(words)

    @property
    def vocab_size(self) -> int:
        return len(self._id_to_token)

    def token_to_id(self, token: str) -> int:
        return self._token_to_id.get(token, UNK)

    def id_to_token(self, idx: int) -> str:
        return self._id_to_token[idx]

    def encode(self, text: str) -> list[int]:
        return [self._token_to_id.get(t, UNK) for t in split_text(text)]

    def decode(self, ids) -> str:
        return " ".join(self._id_to_token[i] for i in ids)

    def vocab(self) -> dict[str, int]:
        return dict(self._token_to_id)

    def save(self, path) -> None:
        write_text_atomic(path, json.dumps({"tokens": self._id_to_token[len(RESERVED_TOKENS):]}))

    @classmethod
    def load(cls, path) -> "Tokenizer":
        path = Path(path)
        if not path.exists():
            raise NotFoundError(f"vocab file not found: {path}")
        data = json.loads(path.read_text())
        return cls(data["tokens"])
