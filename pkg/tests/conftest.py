import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))  # for the oracles module


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def random_weights(shapes, rng, scale=0.2):
    """Random parameter set matching a name -> shape table."""
    w = {}
    for name, shape in shapes.items():
        if name.endswith(".weight"):
            w[name] = rng.normal(scale=scale, size=shape).astype(np.float32)
        elif name.endswith(".scale"):
            w[name] = np.ones(shape, dtype=np.float32)
        else:
            w[name] = np.zeros(shape, dtype=np.float32)
    return w


def identity_mlp_weights(d, prefix="", layers=1):
    w = {}
    for i in range(layers):
        w[f"{prefix}l{i}.weight"] = np.eye(d, dtype=np.float32)
        w[f"{prefix}l{i}.bias"] = np.zeros(d, dtype=np.float32)
        w[f"{prefix}l{i}.scale"] = np.ones(d, dtype=np.float32)
        w[f"{prefix}l{i}.shift"] = np.zeros(d, dtype=np.float32)
    return w
