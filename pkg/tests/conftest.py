import numpy as np
import pytest

from foilmetric.image import LabelMask


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_mask(rng, h=64, w=64, max_labels=6) -> LabelMask:
    """Random canonical mask; labels need not be connected regions."""
    raw = rng.integers(0, max_labels + 1, size=(h, w))
    return LabelMask.canonical(raw)


def mask_from_rows(rows) -> LabelMask:
    return LabelMask.canonical(np.array(rows, dtype=np.int32))
