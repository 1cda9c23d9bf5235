import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from sfplab.model import ModelConfig, init_params  # noqa: E402
from sfplab.tokenizer import build_vocab  # noqa: E402

SMALL_CORPUS = [
    "the dog chases the cat",
    "a cat watches the bird",
    "the chef cuts fresh bread",
    "sailors steer the boat",
    "the bird sings",
]


@pytest.fixture(scope="session")
def small_vocab():
    return build_vocab(SMALL_CORPUS)


@pytest.fixture(scope="session")
def tiny_cfg(small_vocab):
    return ModelConfig(vocab_size=len(small_vocab), d=16, heads=2, layers=2, max_seq_len=24, dropout_rate=0.1)


@pytest.fixture
def tiny_params(tiny_cfg):
    return init_params(tiny_cfg, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def pytest_terminal_summary(terminalreporter):
    from helpers import ACCEPTANCE

    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[number][1])
