from pathlib import Path

import numpy as np
import pytest

from snn_search.indexer import SnnIndex, build_index


@pytest.fixture
def files() -> Path:
    files_dir = Path(__file__).parent / "files"
    return files_dir.resolve()


@pytest.fixture
def d3() -> np.ndarray:
    """Three collinear points along (0.6, 0.8)."""
    return np.array([[0.0, 0.0], [3.0, 4.0], [6.0, 8.0]])


@pytest.fixture
def d3_index(d3) -> SnnIndex:
    return build_index(d3)


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(20240917)
