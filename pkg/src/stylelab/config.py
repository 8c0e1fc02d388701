"""Run configuration: one JSON file drives every pipeline command.

Field defaults carry the published training hyperparameters: contrastive
temperature 0.02, KL weights 0.1, pair-loss weight 0.5, learning rates
2e-4 for pretraining and 1e-4 for finetuning.  Every command echoes its
fully resolved config into the run manifest.
"""

from __future__ import annotations

import json
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path

from .errors import ConfigError
from .util import sha256_json


@dataclass
class CorpusConfig:
    n_authors: int = 16
    n_topics: int = 4
    docs_per_author: int = 32
    style_strength: float = 1.0
    topic_strength: float = 1.0
    # fraction of each author's documents pulled onto their home topic
    topic_skew: float = 0.0
    min_tokens: int = 36
    max_tokens: int = 64
    balance_floor: int = 10
    balance_cap: int = 1000


@dataclass
class MiningConfig:
    n_clusters: int = 16
    theta_lo: float = 0.3
    theta_hi: float = 0.7
    quota: int = 256


@dataclass
class PretrainConfig:
    tau: float = 0.02
    k_negatives: int = 2
    batch_anchors: int = 8
    lr: float = 2e-4
    epochs: int = 3
    hidden: int = 64
    n_layers: int = 2
    out_dim: int = 32
    weight_decay: float = 0.01
    include_self_denominator: bool = False


@dataclass
class FinetuneConfig:
    style_dim: int = 32
    content_dim: int = 32
    beta_s: float = 0.1
    beta_c: float = 0.1
    lambda_dis: float = 0.5
    lr: float = 1e-4
    epochs: int = 2
    hidden: int = 64
    n_layers: int = 2
    gen_embed_dim: int = 64
    gen_layers: int = 2
    weight_decay: float = 0.01
    variant: str = "eavae"
    warm_start: bool = True
    warm_mu_gain: float = 4.0
    log_sigma_bias: float = -2.0
    adapter_scale: float = 0.05
    kl_free_style: float = 6.0
    kl_free_content: float = 48.0
    gen_out_scale: float = 0.1
    style_freeze_frac: float = 0.5
    style_trunk_trainable: bool = False
    recon_updates_encoders: str = "content"
    reverse_style_gradient: bool = False


@dataclass
class EvalConfig:
    recall_k: int = 8
    fpr_caps: list[float] = field(default_factory=lambda: [0.01, 0.05, 0.10])
    detect_refs_k: int = 5
    n_machine_authors: int = 4
    protocol: str = "single-target"
    aggregate: str = "max"
    # how to read "pauc@k" column labels: FPR caps (default) or ref counts
    pauc_axis: str = "fpr"


@dataclass
class RunConfig:
    seed: int = 0
    out_dir: str = "runs/demo"
    corpus: CorpusConfig = field(default_factory=CorpusConfig)
    mining: MiningConfig = field(default_factory=MiningConfig)
    pretrain: PretrainConfig = field(default_factory=PretrainConfig)
    finetune: FinetuneConfig = field(default_factory=FinetuneConfig)
    eval: EvalConfig = field(default_factory=EvalConfig)

    def to_dict(self) -> dict:
        return asdict(self)

    def config_hash(self) -> str:
        return sha256_json(self.to_dict())

    def max_positions(self) -> int:
        """Position budget: longest doc plus prompt and EOS headroom."""
        return self.corpus.max_tokens + 24 + 64 + 8


_SECTIONS = {
    "corpus": CorpusConfig,
    "mining": MiningConfig,
    "pretrain": PretrainConfig,
    "finetune": FinetuneConfig,
    "eval": EvalConfig,
}


def _build_section(cls, data: dict):
    allowed = {f.name for f in fields(cls)}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown {cls.__name__} fields: {sorted(unknown)}")
    return cls(**data)


def config_from_dict(data: dict) -> RunConfig:
    data = dict(data)
    kwargs = {}
    for name, cls in _SECTIONS.items():
        section = data.pop(name, {})
        if not isinstance(section, dict):
            raise ConfigError(f"section {name!r} must be an object")
        kwargs[name] = _build_section(cls, section)
    allowed = {"seed", "out_dir"}
    unknown = set(data) - allowed
    if unknown:
        raise ConfigError(f"unknown top-level config fields: {sorted(unknown)}")
    return RunConfig(seed=int(data.get("seed", 0)),
                     out_dir=str(data.get("out_dir", "runs/demo")), **kwargs)


def load_config(path) -> RunConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        data = json.loads(path.read_text())
    except json.JSONDecodeError as e:
        raise ConfigError(f"{path}: invalid JSON: {e}") from None
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be an object")
    return config_from_dict(data)
