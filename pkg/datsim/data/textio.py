"""Columnar text export: one sample per line as label,is_pseudo,x_1,...,x_n."""
from pathlib import Path
from typing import Union

import numpy as np

from datsim.core.errors import InvalidArgument

from .dataset import Dataset
from .errors import DatasetFormatError

_HEADER = "# datsim-dataset"


def export_dataset(dataset: Dataset, path: Union[str, Path]) -> None:
    lines = [
        f"{_HEADER} input_dim={dataset.input_dim} class_count={dataset.class_count}"
        f" provenance={dataset.provenance}"
    ]
    for x, y, pseudo in zip(dataset.inputs, dataset.labels, dataset.is_pseudo):
        features = ",".join(repr(float(v)) for v in x)
        lines.append(f"{int(y)},{int(pseudo)},{features}")
    Path(path).write_text("\n".join(lines) + "\n", encoding="utf-8")


def _header_fields(path: str, line: str) -> dict[str, str]:
    if not line.startswith(_HEADER):
        raise DatasetFormatError(path, 1, f"Expected a '{_HEADER}' header.")
    fields = {}
    rest = line[len(_HEADER) :].strip()
    # provenance is last and may contain spaces
    head, _, provenance = rest.partition(" provenance=")
    for item in head.split():
        key, sep, value = item.partition("=")
        if not sep:
            raise DatasetFormatError(path, 1, f"Malformed header field '{item}'.")
        fields[key] = value
    fields["provenance"] = provenance
    return fields


def _parse_row(
    name: str, lineno: int, cells: list[str], class_count: int
) -> tuple[int, bool, list[float]]:
    try:
        label = int(cells[0])
        flag = int(cells[1])
        features = [float(c) for c in cells[2:]]
    except ValueError as e:
        raise DatasetFormatError(name, lineno, str(e)) from e
    if not 0 <= label < class_count:
        raise DatasetFormatError(
            name, lineno, f"Label {label} outside [0, {class_count})."
        )
    if flag not in (0, 1):
        raise DatasetFormatError(name, lineno, f"Pseudo flag must be 0 or 1: {flag}.")
    return label, bool(flag), features


def import_dataset(path: Union[str, Path]) -> Dataset:
    name = str(path)
    lines = Path(path).read_text(encoding="utf-8").splitlines()
    if not lines:
        raise DatasetFormatError(name, None, "Empty file.")
    header = _header_fields(name, lines[0])
    try:
        input_dim = int(header["input_dim"])
        class_count = int(header["class_count"])
    except (KeyError, ValueError) as e:
        raise DatasetFormatError(name, 1, f"Bad header: {e}") from e
    inputs, labels, pseudo = [], [], []
    for lineno, line in enumerate(lines[1:], start=2):
        if not line.strip():
            continue
        cells = line.split(",")
        if len(cells) != input_dim + 2:
            raise DatasetFormatError(
                name, lineno, f"Expected {input_dim + 2} columns, got {len(cells)}."
            )
        label, flag, features = _parse_row(name, lineno, cells, class_count)
        labels.append(label)
        pseudo.append(flag)
        inputs.append(features)
    try:
        return Dataset(
            np.array(inputs, dtype=np.float64).reshape(-1, input_dim),
            np.array(labels, dtype=np.int64),
            class_count,
            np.array(pseudo, dtype=bool),
            header["provenance"],
        )
    except InvalidArgument as e:
        raise DatasetFormatError(name, 1, str(e)) from e
