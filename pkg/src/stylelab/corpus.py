"""Synthetic authorship corpus with known style and topic factors.

Each author owns a combination of four style habits (sentence length,
comma rate, ending punctuation, favorite intensifier) and writes about
every topic.  Two strength knobs interpolate the per-author and
per-topic token distributions toward a shared neutral distribution; at
strength zero the corresponding signal vanishes exactly, which the
tests rely on.  A third knob, topic_skew, concentrates each author's
output on a home topic so that topic becomes predictive of authorship:
the conditions under which a similarity model binds identity to subject
matter instead of style.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from itertools import product
from pathlib import Path

import numpy as np

from . import lexicon
from .errors import ConfigError, ParseError
from .tokenizer import Tokenizer, split_text
from .util import write_text_atomic

MIN_DOC_TOKENS = 32
MAX_DOC_TOKENS = 512
# longest sentence a single draw can append after the target is hit
_SENTENCE_SLACK = 24

# factor value -> resolved habit at full strength
_MEAN_LEN = {0: 4.0, 1: 7.0, 2: 11.0}
_COMMA_P = {0: 0.02, 1: 0.30}
_EXCL_P = {0: 0.05, 1: 0.60}
_FAVORITE_W = 0.92

_NEUTRAL = {
    "mean_len": 7.0,
    "comma_p": 0.10,
    "excl_p": 0.20,
    "fav_w": 1.0 / len(lexicon.INTENSIFIERS),
}

_KEYWORD_SLOT_P = 0.55
_INTENSIFIER_SLOT_P = 0.20

FACTOR_NAMES = ("sentence_length", "comma_style", "ending", "intensifier")
_FACTOR_LEVELS = (3, 2, 2, 3)


@dataclass
class Document:
    id: int
    author_id: int
    topic_id: int
    style_factors: list[int]
    tokens: list[int]
    raw_text: str


@dataclass
class Corpus:
    documents: list[Document]
    tokenizer: Tokenizer
    authors: dict[int, list[int]] = field(default_factory=dict)
    topics: dict[int, list[int]] = field(default_factory=dict)
    meta: dict = field(default_factory=dict)

    def doc(self, doc_id: int) -> Document:
        d = self.documents[doc_id]
        if d.id != doc_id:
            raise ConfigError(f"document ids are not dense at {doc_id}")
        return d

    def rebuild_groups(self) -> None:
        self.authors = {}
        self.topics = {}
        for d in self.documents:
            self.authors.setdefault(d.author_id, []).append(d.id)
            self.topics.setdefault(d.topic_id, []).append(d.id)


def style_params(factors: list[int], strength: float) -> dict[str, float]:
    """Interpolate an author's habits between neutral and the factor table."""
    s = float(strength)
    full = {
        "mean_len": _MEAN_LEN[factors[0]],
        "comma_p": _COMMA_P[factors[1]],
        "excl_p": _EXCL_P[factors[2]],
        "fav_w": _FAVORITE_W,
    }
    out = {k: (1.0 - s) * _NEUTRAL[k] + s * full[k] for k in full}
    out["favorite"] = float(factors[3])
    return out


def topic_keyword_weights(n_topics: int, topic_id: int, strength: float) -> np.ndarray:
    """Categorical weights over the flattened keyword bank for one topic."""
    bank_size = n_topics * 8
    s = float(strength)
    w = np.full(bank_size, (1.0 - s) / bank_size, dtype=np.float64)
    lo = topic_id * 8
    w[lo:lo + 8] += s / 8.0
    return w


def _intensifier_weights(params: dict[str, float]) -> np.ndarray:
    n = len(lexicon.INTENSIFIERS)
    fav = int(params["favorite"])
    w = np.full(n, (1.0 - params["fav_w"]) / (n - 1), dtype=np.float64)
    w[fav] = params["fav_w"]
    return w


def _sentence(rng: np.random.Generator, params: dict[str, float],
              bank: list[str], kw_weights: np.ndarray) -> list[str]:
    n_words = max(2, int(round(rng.normal(params["mean_len"], 1.2))))
    words = [lexicon.FUNCTION_WORDS[rng.integers(len(lexicon.FUNCTION_WORDS))]]
    int_w = _intensifier_weights(params)
    for _ in range(n_words - 1):
        r = rng.random()
        if r < _KEYWORD_SLOT_P:
            words.append(bank[int(rng.choice(len(bank), p=kw_weights))])
        elif r < _KEYWORD_SLOT_P + _INTENSIFIER_SLOT_P:
            words.append(lexicon.INTENSIFIERS[int(rng.choice(len(int_w), p=int_w))])
        else:
            words.append(lexicon.FILLER_WORDS[rng.integers(len(lexicon.FILLER_WORDS))])
    tokens: list[str] = []
    for i, w in enumerate(words):
        tokens.append(w)
        if i < len(words) - 1 and rng.random() < params["comma_p"]:
            tokens.append(",")
    tokens.append("!" if rng.random() < params["excl_p"] else ".")
    return tokens


def _document_text(rng: np.random.Generator, params: dict[str, float],
                   bank: list[str], kw_weights: np.ndarray,
                   min_tokens: int, max_tokens: int) -> str:
    target = int(rng.integers(min_tokens, max_tokens + 1))
    tokens: list[str] = []
    while len(tokens) < target:
        tokens.extend(_sentence(rng, params, bank, kw_weights))
    return " ".join(tokens)


def home_topic(author_id: int, n_topics: int) -> int:
    """The topic an author favors under skew.

    Offset by one from the cross-topic hold-out rotation so a skewed
    author is never evaluated on their own home topic.
    """
    return (author_id + 1) % n_topics


def _topic_counts(n_topics: int, docs_per_author: int, home: int,
                  skew: float) -> list[int]:
    """Per-topic document counts for one author.

    skew=0 splits documents evenly; higher skew moves mass onto the
    home topic while every other topic keeps at least two documents.
    """
    base = docs_per_author // n_topics
    away = max(2, int(round((1.0 - skew) * base)))
    away = min(away, base)
    counts = [away] * n_topics
    counts[home] = docs_per_author - away * (n_topics - 1)
    return counts


def _author_topic_sequence(counts: list[int]) -> list[int]:
    """Interleave topics so early documents stay diverse."""
    remaining = list(counts)
    seq: list[int] = []
    while sum(remaining) > 0:
        for t, r in enumerate(remaining):
            if r > 0:
                seq.append(t)
                remaining[t] -= 1
    return seq


def generate_corpus(seed: int, n_authors: int, n_topics: int, docs_per_author: int,
                    style_strength: float, topic_strength: float, *,
                    topic_skew: float = 0.0,
                    min_tokens: int = 36, max_tokens: int = 64,
                    balance_floor: int = 10, balance_cap: int = 1000) -> Corpus:
    if n_authors < 1:
        raise ConfigError(f"need at least one author, got {n_authors}")
    if not 2 <= n_topics <= len(lexicon.TOPIC_BANK):
        raise ConfigError(f"n_topics must be in [2, {len(lexicon.TOPIC_BANK)}], got {n_topics}")
    if not max(2, balance_floor) <= docs_per_author <= balance_cap:
        raise ConfigError(f"docs_per_author must be in [{max(2, balance_floor)}, "
                          f"{balance_cap}], got {docs_per_author}")
    for name, s in (("style_strength", style_strength), ("topic_strength", topic_strength),
                    ("topic_skew", topic_skew)):
        if not 0.0 <= s <= 1.0:
            raise ConfigError(f"{name} must be in [0, 1], got {s}")
    if docs_per_author < 2 * n_topics:
        raise ConfigError(f"docs_per_author must be at least 2 per topic, "
                          f"got {docs_per_author} for {n_topics} topics")
    if min_tokens < MIN_DOC_TOKENS:
        raise ConfigError(f"min_tokens below the {MIN_DOC_TOKENS} floor: {min_tokens}")
    if max_tokens + _SENTENCE_SLACK > MAX_DOC_TOKENS:
        raise ConfigError(f"max_tokens above {MAX_DOC_TOKENS - _SENTENCE_SLACK}: {max_tokens}")
    if min_tokens > max_tokens:
        raise ConfigError(f"min_tokens {min_tokens} exceeds max_tokens {max_tokens}")

    rng = np.random.default_rng(seed)
    combos = list(product(*(range(k) for k in _FACTOR_LEVELS)))
    order = rng.permutation(len(combos))
    author_factors = [list(combos[order[i % len(combos)]]) for i in range(n_authors)]
    author_params = [style_params(f, style_strength) for f in author_factors]

    bank = [kw for _, kws in lexicon.TOPIC_BANK[:n_topics] for kw in kws]
    kw_weights = [topic_keyword_weights(n_topics, t, topic_strength)
                  for t in range(n_topics)]

    texts: list[tuple[int, int, str]] = []
    for a in range(n_authors):
        counts = _topic_counts(n_topics, docs_per_author, home_topic(a, n_topics),
                               topic_skew)
        for t in _author_topic_sequence(counts):
            text = _document_text(rng, author_params[a], bank, kw_weights[t],
                                  min_tokens, max_tokens)
            texts.append((a, t, text))

    tokenizer = Tokenizer.build([t for _, _, t in texts],
                                extra_tokens=lexicon.static_extra_tokens())
    documents = []
    for i, (a, t, text) in enumerate(texts):
        documents.append(Document(
            id=i, author_id=a, topic_id=t,
            style_factors=author_factors[a],
            tokens=tokenizer.encode(text), raw_text=text,
        ))

    corpus = Corpus(documents=documents, tokenizer=tokenizer, meta={
        "seed": seed,
        "n_authors": n_authors,
        "n_topics": n_topics,
        "docs_per_author": docs_per_author,
        "style_strength": float(style_strength),
        "topic_strength": float(topic_strength),
        "topic_skew": float(topic_skew),
        "home_topics": [home_topic(a, n_topics) for a in range(n_authors)],
        "author_style": author_params,
        "author_factors": author_factors,
        "topic_keyword_weights": [w.tolist() for w in kw_weights],
    })
    corpus.rebuild_groups()
    _check_lengths(corpus)
    return corpus


def _check_lengths(corpus: Corpus) -> None:
    for d in corpus.documents:
        n = len(split_text(d.raw_text))
        if not MIN_DOC_TOKENS <= n <= MAX_DOC_TOKENS:
            raise ConfigError(f"document {d.id} has {n} tokens outside "
                              f"[{MIN_DOC_TOKENS}, {MAX_DOC_TOKENS}]")


def save_corpus(corpus: Corpus, path: str | Path) -> None:
    lines = []
    for d in corpus.documents:
        lines.append(json.dumps({
            "id": d.id,
            "author_id": d.author_id,
            "topic_id": d.topic_id,
            "style_factors": d.style_factors,
            "text": d.raw_text,
        }, sort_keys=False))
    write_text_atomic(Path(path), "\n".join(lines) + "\n")


def load_corpus(path: str | Path, meta: dict | None = None) -> Corpus:
    path = Path(path)
    rows = []
    for ln, line in enumerate(path.read_text().splitlines(), start=1):
        if not line.strip():
            continue
        try:
            rows.append(json.loads(line))
        except json.JSONDecodeError as e:
            raise ParseError(f"{path}:{ln}: bad corpus row: {e}", line) from None
    rows.sort(key=lambda r: r["id"])
    tokenizer = Tokenizer.build([r["text"] for r in rows],
                                extra_tokens=lexicon.static_extra_tokens())
    documents = []
    for i, r in enumerate(rows):
        if r["id"] != i:
            raise ParseError(f"{path}: document ids are not dense at {r['id']}",
                             json.dumps(r))
        documents.append(Document(
            id=r["id"], author_id=r["author_id"], topic_id=r["topic_id"],
            style_factors=list(r["style_factors"]),
            tokens=tokenizer.encode(r["text"]), raw_text=r["text"],
        ))
    corpus = Corpus(documents=documents, tokenizer=tokenizer, meta=dict(meta or {}))
    corpus.rebuild_groups()
    return corpus


def split_cross_topic(corpus: Corpus) -> tuple[list[int], list[int]]:
    """Hold out one topic per author, rotating so every topic is held out."""
    n_topics = len(corpus.topics)
    if n_topics < 2:
        raise ConfigError("cross-topic split needs at least two topics")
    train, held = [], []
    for d in corpus.documents:
        if d.topic_id == d.author_id % n_topics:
            held.append(d.id)
        else:
            train.append(d.id)
    if not train or not held:
        raise ConfigError("cross-topic split produced an empty side")
    return train, held
