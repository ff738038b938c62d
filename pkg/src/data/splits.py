"""Seeded train/validation splits"""

from typing import List, Sequence, Tuple

import numpy as np

from src.data.segment import Segment
from src.utils.errors import ContractError


def split(dataset: Sequence[Segment], fractions: Tuple[float, float] = (0.8, 0.2),
          seed: int = 0) -> Tuple[List[Segment], List[Segment]]:
    """
    Shuffle with `seed` and cut into disjoint train and validation lists

    Args:
        dataset: Segments to split
        fractions: (train, val) shares summing to 1
        seed: Shuffle seed

    Returns:
        Tuple[List[Segment], List[Segment]]: Train and validation segments
    """
    train_share, val_share = fractions
    if min(fractions) < 0 or abs(train_share + val_share - 1.0) > 1e-9:
        raise ContractError(f"split fractions must be non-negative and sum to 1, got {fractions}")
    order = np.random.default_rng(seed).permutation(len(dataset))
    cut = int(round(train_share * len(dataset)))
    return [dataset[i] for i in order[:cut]], [dataset[i] for i in order[cut:]]
