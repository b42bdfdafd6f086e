"""In-memory labeled datasets."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Tuple

import numpy as np
import numpy.typing as npt

from datsim.core import Tags
from datsim.core.errors import InvalidArgument
from datsim.core.rng import SERVER_ID, SeededRng
from datsim.models.zoo import LabeledBatch, ModelSpec

Matrix = npt.NDArray[np.float64]
Indices = npt.NDArray[np.int64]


@dataclass(frozen=True, eq=False)
class Dataset:
    """Samples stored column-wise: one input row, label and pseudo flag each."""

    inputs: Matrix
    labels: npt.NDArray[np.int64]
    class_count: int
    is_pseudo: npt.NDArray[np.bool_] = field(default=None)  # type: ignore
    provenance: str = ""

    def __post_init__(self):
        inputs = np.asarray(self.inputs, dtype=np.float64)
        if inputs.ndim != 2:
            raise InvalidArgument(f"Inputs must be a matrix, got shape {inputs.shape}.")
        labels = np.asarray(self.labels, dtype=np.int64).reshape(-1)
        pseudo = (
            np.zeros(labels.shape, dtype=bool)
            if self.is_pseudo is None
            else np.asarray(self.is_pseudo, dtype=bool).reshape(-1)
        )
        if not inputs.shape[0] == labels.size == pseudo.size:
            raise InvalidArgument(
                f"Dataset has {inputs.shape[0]} inputs, {labels.size} labels"
                f" and {pseudo.size} pseudo flags."
            )
        if self.class_count < 2:
            raise InvalidArgument(f"class_count must be >= 2, got {self.class_count}.")
        if labels.size and (labels.min() < 0 or labels.max() >= self.class_count):
            raise InvalidArgument(
                f"Labels must lie in [0, {self.class_count}),"
                f" got range [{labels.min()}, {labels.max()}]."
            )
        for arr in (inputs, labels, pseudo):
            arr.setflags(write=False)
        object.__setattr__(self, "inputs", inputs)
        object.__setattr__(self, "labels", labels)
        object.__setattr__(self, "is_pseudo", pseudo)

    def __len__(self) -> int:
        return int(self.labels.size)

    @property
    def input_dim(self) -> int:
        return int(self.inputs.shape[1])

    def model_spec(self, hidden: Tuple[int, ...] = (), activation="relu") -> ModelSpec:
        return ModelSpec(self.input_dim, self.class_count, tuple(hidden), activation)

    def subset(self, indices: npt.ArrayLike) -> "Dataset":
        idx = np.asarray(indices, dtype=np.int64)
        return Dataset(
            self.inputs[idx],
            self.labels[idx],
            self.class_count,
            self.is_pseudo[idx],
            self.provenance,
        )

    def concat(self, other: "Dataset") -> "Dataset":
        if other.input_dim != self.input_dim or other.class_count != self.class_count:
            raise InvalidArgument("Cannot concatenate datasets of different shapes.")
        return Dataset(
            np.concatenate([self.inputs, other.inputs]),
            np.concatenate([self.labels, other.labels]),
            self.class_count,
            np.concatenate([self.is_pseudo, other.is_pseudo]),
            f"{self.provenance}+{other.provenance}",
        )

    def class_counts(self) -> list[int]:
        return np.bincount(self.labels, minlength=self.class_count).tolist()

    def batch(self, indices: npt.ArrayLike) -> LabeledBatch:
        idx = np.asarray(indices, dtype=np.int64)
        return LabeledBatch(self.inputs[idx], self.labels[idx], self.is_pseudo[idx])

    def as_batch(self) -> LabeledBatch:
        return LabeledBatch(self.inputs, self.labels, self.is_pseudo)

    def pseudo_indices(self) -> Indices:
        return np.flatnonzero(self.is_pseudo)

    def labeled_indices(self) -> Indices:
        return np.flatnonzero(~self.is_pseudo)

    def equals(self, other: "Dataset") -> bool:
        return (
            self.class_count == other.class_count
            and np.array_equal(self.inputs, other.inputs)
            and np.array_equal(self.labels, other.labels)
            and np.array_equal(self.is_pseudo, other.is_pseudo)
        )


def train_test_split(
    dataset: Dataset, test_fraction: float, seed: int
) -> Tuple[Dataset, Dataset]:
    """Seeded random split; the test part gets round(test_fraction * n) samples."""
    if not 0 < test_fraction < 1:
        raise InvalidArgument(f"test_fraction must lie in (0, 1), got {test_fraction}.")
    n_test = int(round(test_fraction * len(dataset)))
    if n_test == 0 or n_test == len(dataset):
        raise InvalidArgument(
            f"Splitting {len(dataset)} samples at {test_fraction} leaves a part empty."
        )
    stream = SeededRng(seed).child(SERVER_ID, 0, Tags.SPLIT)
    perm = stream.generator().permutation(len(dataset))
    train = dataset.subset(np.sort(perm[n_test:]))
    return train, dataset.subset(np.sort(perm[:n_test]))
