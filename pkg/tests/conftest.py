"""Shared fixtures: tiny corpora and deterministic generators."""

import numpy as np
import pytest

from stylelab.config import RunConfig, PretrainConfig, FinetuneConfig, CorpusConfig
from stylelab.corpus import generate_corpus


@pytest.fixture(scope="session")
def small_corpus():
    """4 authors x 4 topics x 12 docs; enough for both mined-pair families."""
    return generate_corpus(3, 4, 4, 12, 1.0, 1.0)


@pytest.fixture(scope="session")
def tiny_corpus():
    """2 authors x 2 topics x 10 docs; the smallest corpus most tests need."""
    return generate_corpus(5, 2, 2, 10, 1.0, 1.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(0)


@pytest.fixture()
def run_config():
    return RunConfig(
        corpus=CorpusConfig(n_authors=4, n_topics=4, docs_per_author=12),
        pretrain=PretrainConfig(epochs=1),
        finetune=FinetuneConfig(epochs=1),
    )
