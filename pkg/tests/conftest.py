import pytest

from currigen.dataset import SubjectCategory
from currigen.synthetic import MockAgentBackend, make_synthetic_corpus


@pytest.fixture
def mock_backend():
    return MockAgentBackend()


@pytest.fixture(scope="session")
def big_corpus():
    # enough headroom in every subject for the default 200-problem quota
    return make_synthetic_corpus({s: 80 for s in SubjectCategory}, rng_seed=7)


@pytest.fixture
def corpus_factory():
    def build(per_subject: int, rng_seed: int = 7):
        return make_synthetic_corpus(
            {s: per_subject for s in SubjectCategory}, rng_seed=rng_seed
        )

    return build
