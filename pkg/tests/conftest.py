import numpy as np
import pytest

from helpers import POTSDAM, blobby_pair, random_pair, write_dataset


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


@pytest.fixture
def potsdam():
    return POTSDAM


@pytest.fixture
def tiny_dataset(tmp_path):
    """On-disk dataset: 3 train + 2 test scenes of 16x16, rich in blobs."""
    gen = np.random.default_rng(77)
    scenes = []
    for i in range(3):
        scenes.append(("train", f"scene_tr{i}", blobby_pair(gen, 16, 16)))
    for i in range(2):
        scenes.append(("test", f"scene_te{i}", random_pair(gen, 16, 16)))
    manifest = write_dataset(tmp_path / "data", scenes)
    return manifest
