"""Desk-scale laboratory for explainable authorship representation models.

Synthetic corpora with known style and topic factors, a from-scratch
reverse-mode autodiff engine, contrastive style pretraining, dual-latent
variational finetuning with an explanation-generating discriminator, and
retrieval / detection evaluation, all deterministic under a seed.
"""

from .autodiff import MASK_VALUE, Tensor, backward, forward, grad_check, tensor
from .bm25 import Bm25Index
from .checkpoints import load_checkpoint, save_checkpoint
from .config import (CorpusConfig, EvalConfig, FinetuneConfig, MiningConfig,
                     PretrainConfig, RunConfig, config_from_dict, load_config)
from .contrastive import (ContrastiveBatch, StyleEncoder, build_batch,
                          positive_mask, supcon_loss, supcon_loss_from_logits)
from .corpus import (Corpus, Document, generate_corpus, load_corpus,
                     save_corpus, split_cross_topic, style_params,
                     topic_keyword_weights)
from .errors import (ConfigError, ContractError, MiningError, NotFoundError,
                     NumericsError, ParseError, ShapeError, StylelabError)
from .evaluation import (DetectionScores, MetricsReport, ScoredRanking,
                         aggregate_author, detect_multi_target,
                         detect_single_target, mrr, pauc, rank, recall_at_k,
                         roc_points)
from .experiment import StudyResult, run_seed, run_study
from .generator import (DecisionRecord, Generator, HybridPrompt,
                        PromptTemplate, compile_template, default_templates,
                        parse_decision, total_loss)
from .kmeans import KmeansResult, kmeans
from .mining import (MiningResult, PairRecord, load_pairs, mine_hard_pairs,
                     save_pairs, synth_explanations, tfidf_embeddings)
from .tokenizer import Tokenizer
from .vae import (DualEncoders, GaussianEncoder, LatentGaussian, kl_std_normal,
                  reparameterize, vae_loss)

__version__ = "0.1.0"

__all__ = [
    "Bm25Index", "ContrastiveBatch", "ConfigError", "ContractError",
    "Corpus", "CorpusConfig", "DecisionRecord", "DetectionScores", "Document",
    "DualEncoders", "EvalConfig", "FinetuneConfig", "GaussianEncoder",
    "Generator", "HybridPrompt", "KmeansResult", "LatentGaussian",
    "MASK_VALUE", "MetricsReport", "MiningConfig", "MiningError",
    "MiningResult", "NotFoundError", "NumericsError", "PairRecord",
    "ParseError", "PretrainConfig", "PromptTemplate", "RunConfig",
    "ScoredRanking", "ShapeError", "StudyResult", "StyleEncoder",
    "StylelabError", "Tensor", "Tokenizer", "aggregate_author", "backward",
    "build_batch", "compile_template", "config_from_dict", "default_templates",
    "detect_multi_target", "detect_single_target", "forward",
    "generate_corpus", "grad_check", "kl_std_normal", "kmeans",
    "load_checkpoint", "load_config", "load_corpus", "load_pairs",
    "mine_hard_pairs", "mrr", "parse_decision", "pauc", "positive_mask",
    "rank", "recall_at_k", "reparameterize", "roc_points", "run_seed",
    "run_study", "save_checkpoint", "save_corpus", "save_pairs",
    "split_cross_topic", "style_params", "supcon_loss",
    "supcon_loss_from_logits", "synth_explanations", "tensor",
    "tfidf_embeddings", "topic_keyword_weights", "total_loss", "vae_loss",
]
