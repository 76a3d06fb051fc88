import pytest

from onionlens_trainer import data
from onionlens_trainer import manifest as mf


@pytest.fixture(scope="session")
def tiny_corpus(tmp_path_factory):
    """20 images per class at 64px, with the manifest alongside."""
    root = tmp_path_factory.mktemp("tiny")
    manifest = data.generate({k: 20 for k in mf.CLASS_ORDER}, root,
                             size=64, seed=11)
    return root, manifest
