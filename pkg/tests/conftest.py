import sys
from pathlib import Path

import pytest

sys.path.insert(0, str(Path(__file__).parent))

from semdvc.synthetic import generate_synthetic_dataset


@pytest.fixture(scope="session")
def tiny_dataset():
    """4 small videos, 2 modalities of dim 12, label space of 8 regions."""
    records, lexicon, label_space = generate_synthetic_dataset(
        seed=3, num_videos=4, max_events=3, feature_dim=12, modalities=2
    )
    return records, lexicon, label_space
