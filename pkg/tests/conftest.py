"""Pytest configuration and fixtures for pifnet tests."""

import json
from pathlib import Path

import numpy as np
import pytest

from pifnet.core.models import Law, LevySpec, NetworkConfig


FIXTURES_DIR = Path(__file__).parent / "fixtures"


# Non-symmetric counterexample: {1, 2} settles and pushes neuron 3 upward.
COUNTEREXAMPLE_MATRIX = [[8.0, 2.0, 6.0], [2.0, 8.0, 6.0], [6.0, 6.0, 8.0]]


def explicit_network(matrix, nu=1.0, sigma=0.0) -> NetworkConfig:
    """Network with constant signal laws given by `matrix`."""
    matrix = np.asarray(matrix, dtype=float)
    n = matrix.shape[0]
    nu = np.broadcast_to(np.asarray(nu, dtype=float), (n,))
    return NetworkConfig(
        specs=tuple(LevySpec(nu=float(nu[i]), sigma=sigma) for i in range(n)),
        signal_laws=tuple(tuple(Law.constant(v) for v in row) for row in matrix),
    )


def symmetric_matrix(H, w) -> np.ndarray:
    """Mean matrix with b_ii = H_i and b_ij = w_i."""
    H = np.asarray(H, dtype=float)
    w = np.asarray(w, dtype=float)
    B = np.repeat(w[:, None], len(H), axis=1)
    np.fill_diagonal(B, H)
    return B


@pytest.fixture
def single_neuron() -> NetworkConfig:
    """Deterministic lone neuron with nu=1 and reset level 2."""
    return NetworkConfig.symmetric(1, 2.0, 1.0, 1.0)


@pytest.fixture
def pair() -> NetworkConfig:
    """Deterministic symmetric pair H=2, w=1, nu=1."""
    return NetworkConfig.symmetric(2, 2.0, 1.0, 1.0)


@pytest.fixture
def noisy_triple() -> NetworkConfig:
    """Symmetric N=3 network H=2, w=1, nu=1 with Brownian noise."""
    return NetworkConfig.symmetric(3, 2.0, 1.0, 1.0, sigma=0.5)


@pytest.fixture
def jumpy_pair() -> NetworkConfig:
    """Symmetric pair driven by Brownian motion plus exponential jumps."""
    return NetworkConfig.symmetric(
        2, 2.0, 1.0, 1.0, sigma=0.5, jump_rate=2.0, jump_law=Law.exponential(0.3),
        signal_family="exponential",
    )


@pytest.fixture
def counterexample_network() -> NetworkConfig:
    return explicit_network(COUNTEREXAMPLE_MATRIX, nu=1.0, sigma=0.5)


@pytest.fixture
def symmetric_document() -> dict:
    """Minimal configuration document for a noisy symmetric triple."""
    return {
        "network": {"symmetric": {"n": 3, "H": 2.0, "w": 1.0, "nu": 1.0, "sigma": 0.5}},
        "sim": {"seed": 7, "horizon": 20.0, "dt": 0.01, "replicas": 2},
    }


@pytest.fixture
def counterexample_document() -> dict:
    return {
        "network": {
            "explicit": {
                "neurons": [{"nu": 1.0, "sigma": 0.5} for _ in range(3)],
                "signals": [row[:] for row in COUNTEREXAMPLE_MATRIX],
            }
        },
        "sim": {"seed": 11, "horizon": 5.0, "dt": 0.01},
    }


@pytest.fixture
def write_config(tmp_path: Path):
    """Write a configuration document to tmp_path and return its path."""
    def _write(document: dict, name: str = "config.json") -> Path:
        path = tmp_path / name
        path.write_text(json.dumps(document), encoding="utf-8")
        return path

    return _write
