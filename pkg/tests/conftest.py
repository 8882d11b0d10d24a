import numpy as np
import pytest
from scipy.special import logsumexp

from ddsd.decoder import Trellis


def random_trellis(rng, n_states, n_frames, sparse=False):
    """Random valid trellis; ``sparse`` zeroes some transitions (but never a whole row)."""
    a = rng.dirichlet(np.ones(n_states), size=n_states)
    if sparse and n_states > 1:
        drop = rng.random((n_states, n_states)) < 0.3
        drop[np.arange(n_states), rng.integers(n_states, size=n_states)] = False
        a = np.where(drop, 0.0, a)
        a /= a.sum(axis=1, keepdims=True)
    pi = rng.dirichlet(np.ones(n_states))
    e = rng.normal(0.0, 2.0, size=(n_frames, n_states))
    with np.errstate(divide="ignore"):
        return Trellis(np.log(a), e, np.log(pi))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


# Small but complete pipeline configuration for CLI-level tests.
TINY_CONFIG = {
    "seed": 7,
    "synth": {"n_directed": 8, "n_nondirected": 8},
    "acoustic": {"hidden_dims": [6], "train": {"epochs": 1, "batch_size": 4}},
    "char": {"hidden_dims": [4], "train": {"epochs": 1, "batch_size": 4}},
    "fusion": {"hidden_dims": [4], "train": {"epochs": 3, "batch_size": 4}},
}


def write_tiny_config(path, out):
    import json

    path.write_text(json.dumps({**TINY_CONFIG, "out": str(out)}))
    return path


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
