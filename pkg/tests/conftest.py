import random
from pathlib import Path

import pytest

from evd.classifier import TrainConfig, train
from evd.corpus import CLEAN, TrainingTriplet, VulnLabel
from evd.encoder import Vocabulary

DATA = Path(__file__).parent / "data"

TOKENS = "alpha beta gamma delta eps zeta eta theta".split()


def separable_corpus(n: int, positive_rate: float = 0.05, seed: int = 1,
                     planted: str = "tainted_sink") -> list[TrainingTriplet]:
    """Synthetic corpus where one planted token marks the vulnerable class."""
    rng = random.Random(seed)
    out = []
    for i in range(n):
        vulnerable = rng.random() < positive_rate
        words = [rng.choice(TOKENS) for _ in range(rng.randint(3, 10))]
        block = " ".join(words) + (f" {planted}" if vulnerable else "")
        label = VulnLabel("vulnerable", "CWE-89") if vulnerable else CLEAN
        out.append(
            TrainingTriplet(
                context="request handler ",
                block=block,
                label=label,
                repo=f"repo-{i % 23}",
                language="javascript",
            )
        )
    return out


@pytest.fixture(scope="session")
def data_dir() -> Path:
    return DATA


@pytest.fixture(scope="session")
def small_vocab() -> Vocabulary:
    return Vocabulary(size=2**12)


@pytest.fixture(scope="session")
def demo_model(small_vocab):
    corpus = separable_corpus(2000, seed=3)
    return train(corpus, TrainConfig(epochs=20, seed=0), small_vocab)
