"""
Data package.

Modules:
    segment.py: The Segment record shared by every data source
    synthetic.py: Seeded synthetic segments with recoverable labels
    features.py: Feature files and annotation tables
    splits.py: Seeded train/validation splits
"""

from .segment import Segment
from .synthetic import SyntheticConfig, gen_dataset
from .features import load_features, write_features
from .splits import split

__all__ = ['Segment', 'SyntheticConfig', 'gen_dataset', 'load_features', 'write_features', 'split']
