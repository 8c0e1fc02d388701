"""Unified conditional generator with hybrid prompting.

A fixed token template is embedded, its placeholder rows are overwritten
in place by linear adapters applied to latent vectors, and position
embeddings are added uniformly.  A small causal decoder conditions on the
resulting prompt matrix: full attention within the prompt, causal
attention over targets.  The same decoder serves reconstruction and the
two explainable discrimination tasks, whose targets are JSON-like
decision strings with a determination and an explanation field.
"""

from __future__ import annotations

import json
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import autodiff as ad
from . import lexicon
from .autodiff import Tensor
from .errors import ConfigError, ContractError, ParseError, ShapeError
from .nn import Block, Linear, prefix_causal_mask
from .tokenizer import EOS, PLH1, PLH2, Tokenizer, split_text
from .util import write_text_atomic

DEFAULT_LAMBDA_DIS = 0.5
EXPLANATION_BUDGET = 48

TASK_RECONSTRUCTION = "reconstruction"
TASK_STYLE = "style-discrimination"
TASK_CONTENT = "content-discrimination"

ROLE_STYLE = "style-slot"
ROLE_CONTENT = "content-slot"
ROLE_PAIR_1 = "pair-slot-1"
ROLE_PAIR_2 = "pair-slot-2"

_TASK_ROLES = {
    TASK_RECONSTRUCTION: (ROLE_STYLE, ROLE_CONTENT),
    TASK_STYLE: (ROLE_PAIR_1, ROLE_PAIR_2),
    TASK_CONTENT: (ROLE_PAIR_1, ROLE_PAIR_2),
}

PLACEHOLDER_MARK = "<placeholder>"


@dataclass
class PromptTemplate:
    task: str
    token_ids: list[int]
    placeholder_positions: list[int]
    roles: list[str]
    text: str = ""

    def __post_init__(self):
        if self.task not in _TASK_ROLES:
            raise ConfigError(f"unknown task tag {self.task!r}")
        if len(self.placeholder_positions) != 2 or len(self.roles) != 2:
            raise ConfigError(f"{self.task}: expected exactly 2 placeholders, "
                              f"got {len(self.placeholder_positions)}")
        if tuple(self.roles) != _TASK_ROLES[self.task]:
            raise ConfigError(f"{self.task}: roles {self.roles} do not match "
                              f"{_TASK_ROLES[self.task]}")
        last = len(self.token_ids) - 1
        for p in self.placeholder_positions:
            if not 0 < p < last:
                raise ConfigError(f"{self.task}: placeholder at {p} is not "
                                  f"strictly inside the template")

    def __len__(self) -> int:
        return len(self.token_ids)


def compile_template(task: str, text: str, tokenizer: Tokenizer) -> PromptTemplate:
    """Turn marker text into ids, with reserved placeholder token ids."""
    if task not in _TASK_ROLES:
        raise ConfigError(f"unknown task tag {task!r}")
    segments = text.split(PLACEHOLDER_MARK)
    if len(segments) != 3:
        raise ConfigError(f"{task}: template must contain exactly 2 "
                          f"{PLACEHOLDER_MARK!r} markers")
    ids: list[int] = []
    positions: list[int] = []
    for i, seg in enumerate(segments):
        ids.extend(tokenizer.encode(seg))
        if i < 2:
            positions.append(len(ids))
            ids.append(PLH1 if i == 0 else PLH2)
    return PromptTemplate(task=task, token_ids=ids,
                          placeholder_positions=positions,
                          roles=list(_TASK_ROLES[task]), text=text)


def default_templates(tokenizer: Tokenizer) -> dict[str, PromptTemplate]:
    return {
        TASK_RECONSTRUCTION: compile_template(
            TASK_RECONSTRUCTION, lexicon.TEMPLATE_RECONSTRUCTION, tokenizer),
        TASK_STYLE: compile_template(
            TASK_STYLE, lexicon.TEMPLATE_STYLE_DISCRIMINATION, tokenizer),
        TASK_CONTENT: compile_template(
            TASK_CONTENT, lexicon.TEMPLATE_CONTENT_DISCRIMINATION, tokenizer),
    }


def save_templates(templates: dict[str, PromptTemplate], path) -> None:
    rows = [{"task": t.task, "text": t.text, "roles": t.roles}
            for _, t in sorted(templates.items())]
    write_text_atomic(path, json.dumps(rows, indent=2) + "\n")


def load_templates(path, tokenizer: Tokenizer) -> dict[str, PromptTemplate]:
    rows = json.loads(Path(path).read_text())
    out = {}
    for r in rows:
        t = compile_template(r["task"], r["text"], tokenizer)
        if list(r.get("roles", t.roles)) != t.roles:
            raise ConfigError(f"{r['task']}: role order {r['roles']} does not "
                              f"match the task contract {t.roles}")
        out[t.task] = t
    return out


@dataclass
class HybridPrompt:
    embedded: Tensor
    prompt_len: int
    task: str
    # (position, role, injected row before position embeddings) per slot
    provenance: list[tuple[int, str, np.ndarray]] = field(default_factory=list)


@dataclass
class DecisionRecord:
    label: str
    explanation: str
    raw_text: str


class Generator:
    """Shared decoder over [prompt; target] rows with adapter injection."""

    def __init__(self, rng: np.random.Generator, vocab_size: int,
                 embed_dim: int = 64, n_layers: int = 2,
                 style_dim: int = 32, content_dim: int = 32,
                 max_positions: int = 256,
                 templates: dict[str, PromptTemplate] | None = None,
                 reverse_style_gradient: bool = False,
                 adapter_scale: float = 0.05,
                 out_scale: float = 0.0):
        self.vocab_size = vocab_size
        self.embed_dim = embed_dim
        self.max_positions = max_positions
        self.reverse_style_gradient = reverse_style_gradient
        self.embed = Tensor(rng.normal(0.0, 0.1, size=(vocab_size, embed_dim)),
                            requires_grad=True)
        self.pos = Tensor(rng.normal(0.0, 0.05, size=(max_positions, embed_dim)),
                          requires_grad=True)
        self.blocks = [Block(rng, embed_dim) for _ in range(n_layers)]
        # zero output head by default: the untrained decoder is exactly
        # uniform; training configs may pick a small random head instead
        if out_scale == 0.0:
            out_w = np.zeros((embed_dim, vocab_size))
        else:
            out_w = rng.normal(0.0, out_scale, size=(embed_dim, vocab_size))
        self.out_w = Tensor(out_w, requires_grad=True)
        self.out_b = Tensor(np.zeros((1, vocab_size)), requires_grad=True)
        # small init keeps injected rows near token-embedding magnitude
        self.style_adapter = Linear(rng, style_dim, embed_dim,
                                    scale=adapter_scale)
        self.content_adapter = Linear(rng, content_dim, embed_dim,
                                      scale=adapter_scale)
        self.templates = templates or {}

    def params(self, prefix: str = "gen") -> dict[str, Tensor]:
        out = {f"{prefix}.embed": self.embed, f"{prefix}.pos": self.pos}
        for i, block in enumerate(self.blocks):
            out.update(block.params(f"{prefix}.blocks.{i}"))
        out.update({f"{prefix}.out_w": self.out_w, f"{prefix}.out_b": self.out_b})
        out.update(self.style_adapter.params(f"{prefix}.style_adapter"))
        out.update(self.content_adapter.params(f"{prefix}.content_adapter"))
        return out

    def _adapter_for(self, task: str, role: str):
        if task == TASK_RECONSTRUCTION:
            return self.style_adapter if role == ROLE_STYLE else self.content_adapter
        return self.style_adapter if task == TASK_STYLE else self.content_adapter

    def build_prompt(self, template: PromptTemplate,
                     latents: dict[str, Tensor]) -> HybridPrompt:
        """Embed the template, inject adapted latents at the placeholder
        rows, then add position embeddings uniformly."""
        for role in template.roles:
            if role not in latents:
                raise ContractError(f"missing latent for role {role!r}")
        parts: list[Tensor] = []
        provenance: list[tuple[int, str, np.ndarray]] = []
        p1, p2 = template.placeholder_positions
        spans = [(0, p1), (p1 + 1, p2), (p2 + 1, len(template.token_ids))]
        for slot in range(2):
            lo, hi = spans[slot]
            if hi > lo:
                parts.append(ad.embedding_lookup(self.embed,
                                                 template.token_ids[lo:hi]))
            role = template.roles[slot]
            z = latents[role]
            if z.data.ndim != 2 or z.shape[0] != 1:
                raise ShapeError(f"latent for {role!r} must be [1, D], "
                                 f"got {z.shape}")
            adapter = self._adapter_for(template.task, role)
            if template.task == TASK_STYLE and self.reverse_style_gradient:
                z = ad.grad_reverse(z)
            injected = adapter(z)
            pos = template.placeholder_positions[slot]
            provenance.append((pos, role, injected.data[0].copy()))
            parts.append(injected)
        lo, hi = spans[2]
        parts.append(ad.embedding_lookup(self.embed, template.token_ids[lo:hi]))
        rows = ad.concat(parts, axis=0)
        t = len(template.token_ids)
        if t > self.max_positions:
            raise ShapeError(f"template length {t} exceeds {self.max_positions}")
        embedded = ad.add(rows, ad.narrow(self.pos, slice(0, t)))
        return HybridPrompt(embedded=embedded, prompt_len=t,
                            task=template.task, provenance=provenance)

    def _decode_states(self, hybrid: HybridPrompt, target_prefix: list[int]) -> Tensor:
        """Hidden states over [prompt rows; embedded target prefix]."""
        tp = hybrid.prompt_len
        total = tp + len(target_prefix)
        if total > self.max_positions:
            raise ShapeError(f"sequence length {total} exceeds {self.max_positions}")
        if target_prefix:
            tgt = ad.add(ad.embedding_lookup(self.embed, target_prefix),
                         ad.narrow(self.pos, slice(tp, total)))
            h = ad.concat([hybrid.embedded, tgt], axis=0)
        else:
            h = hybrid.embedded
        mask = prefix_causal_mask(tp, total)
        for block in self.blocks:
            h = block(h, mask)
        return h

    def _logits(self, states: Tensor) -> Tensor:
        return ad.add(ad.matmul(states, self.out_w), self.out_b)

    def teacher_forced_nll(self, hybrid: HybridPrompt, target: list[int]) -> Tensor:
        """-sum_k log p(y_k | y_<k, prompt); prediction row for y_k is
        prompt_len + k - 1."""
        if not target:
            raise ContractError("teacher forcing needs a non-empty target")
        if target[-1] != EOS:
            raise ContractError("target must end with EOS")
        states = self._decode_states(hybrid, list(target[:-1]))
        tp = hybrid.prompt_len
        rows = ad.narrow(states, slice(tp - 1, tp + len(target) - 1))
        logits = self._logits(rows)
        lse = ad.logsumexp(logits, axis=1)
        gold = ad.narrow(logits, (np.arange(len(target)), np.asarray(target)))
        return ad.add(ad.tsum(lse), ad.mul(ad.tsum(gold), -1.0))

    def reconstruction_nll(self, z_s: Tensor, z_c: Tensor,
                           doc_tokens: list[int]) -> Tensor:
        """Teacher-forced NLL of the document plus EOS given both latents;
        this is the handle the VAE objective consumes."""
        template = self.templates.get(TASK_RECONSTRUCTION)
        if template is None:
            raise ConfigError("generator has no reconstruction template")
        hybrid = self.build_prompt(template, {ROLE_STYLE: z_s, ROLE_CONTENT: z_c})
        return self.teacher_forced_nll(hybrid, list(doc_tokens) + [EOS])

    def discrimination_nll(self, task: str, z_i: Tensor, z_j: Tensor,
                           target: list[int]) -> Tensor:
        template = self.templates.get(task)
        if template is None:
            raise ConfigError(f"generator has no {task} template")
        hybrid = self.build_prompt(template, {ROLE_PAIR_1: z_i, ROLE_PAIR_2: z_j})
        return self.teacher_forced_nll(hybrid, target)

    def generate(self, hybrid: HybridPrompt, max_len: int, mode: str = "greedy",
                 temperature: float = 1.0,
                 rng: np.random.Generator | None = None) -> list[int]:
        """Autoregressive decoding; stops at EOS or max_len tokens."""
        if max_len < 1:
            raise ContractError(f"max_len must be >= 1, got {max_len}")
        if mode not in ("greedy", "sample"):
            raise ConfigError(f"unknown decode mode {mode!r}")
        if mode == "sample":
            if rng is None:
                raise ConfigError("sampling requires a seeded generator")
            if temperature <= 0.0:
                raise ConfigError(f"temperature must be positive, got {temperature}")
        out: list[int] = []
        for _ in range(max_len):
            states = self._decode_states(hybrid, out)
            last = ad.narrow(states, slice(states.shape[0] - 1, states.shape[0]))
            logits = self._logits(last).data[0]
            if mode == "greedy":
                nxt = int(np.argmax(logits))
            else:
                scaled = logits / temperature
                p = np.exp(scaled - scaled.max())
                p /= p.sum()
                nxt = int(rng.choice(len(p), p=p))
            out.append(nxt)
            if nxt == EOS:
                break
        return out


def serialize_decision(kind: str, same: bool, explanation: str) -> str:
    """JSON-like decision string with the determination and explanation
    fields, using the field spelling the targets are trained on."""
    if kind == "style":
        determination = "same author" if same else "different author"
    elif kind == "content":
        determination = "same content" if same else "different content"
    else:
        raise ConfigError(f"unknown decision kind {kind!r}")
    return json.dumps({"determination": determination,
                       "explaination": explanation})


_TARGET_CACHE: dict[tuple, list[int]] = {}


def decision_target(tokenizer: Tokenizer, kind: str, same: bool,
                    explanation: str,
                    budget: int = EXPLANATION_BUDGET) -> list[int]:
    """Tokenized decision string, explanation truncated to the budget,
    terminated by EOS.  Cached: the same decision is revisited every
    epoch during training."""
    key = (id(tokenizer), kind, same, explanation, budget)
    hit = _TARGET_CACHE.get(key)
    if hit is not None:
        return hit
    words = split_text(explanation)
    if len(words) > budget:
        words = words[:budget]
    text = serialize_decision(kind, same, " ".join(words))
    ids = tokenizer.encode(text) + [EOS]
    if len(_TARGET_CACHE) > 65536:
        _TARGET_CACHE.clear()
    _TARGET_CACHE[key] = ids
    return ids


_DETERMINATION_RE = re.compile(
    r'determination\s*"?\s*:\s*"\s*([^"]*?)\s*"', re.IGNORECASE)
_EXPLANATION_RE = re.compile(
    r'expla(?:i)?nation\s*"?\s*:\s*"\s*([^"]*?)\s*"', re.IGNORECASE)


def parse_decision(text: str) -> DecisionRecord:
    """Extract (label, explanation) from decision text; tolerant of the
    spaced form produced by detokenization and of either explanation
    spelling."""
    m = _DETERMINATION_RE.search(text)
    if m is None:
        raise ParseError("no determination field found", text)
    determination = m.group(1).lower()
    if "same" in determination:
        label = "same"
    elif "different" in determination:
        label = "different"
    else:
        raise ParseError(f"determination {determination!r} is neither same "
                         f"nor different", text)
    e = _EXPLANATION_RE.search(text)
    if e is None:
        raise ParseError("no explanation field found", text)
    return DecisionRecord(label=label, explanation=e.group(1).strip(),
                          raw_text=text)


def discriminator_loss(pair, z_s_i: Tensor, z_s_j: Tensor, z_c_i: Tensor,
                       z_c_j: Tensor, generator: Generator,
                       tokenizer: Tokenizer) -> Tensor:
    """Sum of the style and content discrimination NLLs for one pair.

    ``pair`` must carry style_label / content_label and the two
    explanation strings (a mined PairRecord does).
    """
    style_target = decision_target(tokenizer, "style",
                                   pair.style_label == "same-author",
                                   pair.style_explanation)
    content_target = decision_target(tokenizer, "content",
                                     pair.content_label == "same-content",
                                     pair.content_explanation)
    style_nll = generator.discrimination_nll(TASK_STYLE, z_s_i, z_s_j,
                                             style_target)
    content_nll = generator.discrimination_nll(TASK_CONTENT, z_c_i, z_c_j,
                                               content_target)
    return ad.add(style_nll, content_nll)


def total_loss(vae_total: Tensor, dis_loss: Tensor,
               lambda_dis: float = DEFAULT_LAMBDA_DIS) -> Tensor:
    if lambda_dis < 0.0:
        raise ConfigError(f"lambda_dis must be nonnegative, got {lambda_dis}")
    return ad.add(vae_total, ad.mul(dis_loss, lambda_dis))
