import pytest

from qpop.bundle import build_bundle
from qpop.corpus import GeneratorConfig, generate_corpus


@pytest.fixture(scope="session")
def desk_corpus():
    """Small calibrated corpus shared by service/intervention/CLI tests."""
    return generate_corpus(GeneratorConfig(n_questions=8000, seed=5))


@pytest.fixture(scope="session")
def desk_bundle(desk_corpus):
    return build_bundle(desk_corpus, n_topics=12, seed=3)
