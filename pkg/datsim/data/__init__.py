"""Synthetic datasets and augmentations for desk-scale experiments."""

from .dataset import Dataset, train_test_split
from .errors import DatasetFormatError, GeneratorError
from .generators import (
    gaussian_noisy_copies,
    gen_gaussian_mixture,
    gen_two_moons,
    gen_unlabeled_points,
    pseudo_label,
)
from .textio import export_dataset, import_dataset
