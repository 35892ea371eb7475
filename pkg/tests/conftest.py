"""Shared fixtures: small deterministic corpora, acceptance checklist hook."""

import numpy as np
import pytest

from seals.index import ExactIndex
from seals.synthetic import SyntheticSpec, make_corpus


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    """Echo the acceptance checklist lines recorded by tests/test_acceptance.py."""
    lines = getattr(config, "acceptance_lines", None)
    if lines:
        terminalreporter.section("acceptance checklist")
        for line in lines:
            terminalreporter.write_line(line)


@pytest.fixture(scope="session")
def small_corpus():
    """2000x16 clustered corpus with a 500-row eval split."""
    spec = SyntheticSpec(
        n=2000, dim=16, num_concepts=4, prevalence=0.02, rng_seed=1, eval_n=500
    )
    return make_corpus(spec)


@pytest.fixture(scope="session")
def small_index(small_corpus):
    dataset, _ = small_corpus
    index = ExactIndex(dataset.vectors)
    index.precompute_table(64)
    return index


@pytest.fixture(scope="session")
def tiny_corpus():
    """400x8 corpus for degenerate and exhaustive checks."""
    spec = SyntheticSpec(
        n=400, dim=8, num_concepts=2, prevalence=0.05, rng_seed=5, eval_n=200
    )
    return make_corpus(spec)
