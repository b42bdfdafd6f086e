"""Seeded synthetic datasets, pseudo-labeling and noisy-copy augmentation."""
import numpy as np
import numpy.typing as npt

from datsim.core import Tags
from datsim.core.errors import InvalidArgument
from datsim.core.params import LayeredParams
from datsim.core.rng import SERVER_ID, SeededRng
from datsim.models.zoo import ModelSpec, predict_batch

from .dataset import Dataset, Matrix
from .errors import GeneratorError


def _data_rng(seed: int, round_: int = 0) -> np.random.Generator:
    return SeededRng(seed).child(SERVER_ID, round_, Tags.DATA).generator()


def _random_rotation(dim: int, rng: np.random.Generator) -> Matrix:
    rotation, _ = np.linalg.qr(rng.normal(size=(dim, dim)))
    return rotation


def simplex_means(
    classes: int, dim: int, separation: float, rng: np.random.Generator
) -> Matrix:
    """Vertices of a randomly rotated regular simplex with the given edge length.

    Equidistant points exist only for classes <= dim + 1.
    """
    if classes > dim + 1:
        raise GeneratorError(
            f"{classes} equidistant class means do not fit in {dim} dimensions."
        )
    centred = np.eye(classes) - 1.0 / classes
    # rows of vt span the (classes - 1)-dimensional hull of the centred vertices
    _, _, vt = np.linalg.svd(centred)
    coords = centred @ vt[: classes - 1].T
    embedded = np.zeros((classes, dim))
    embedded[:, : classes - 1] = coords
    rotation = _random_rotation(dim, rng)
    return (separation / np.sqrt(2.0)) * embedded @ rotation.T


def lattice_means(
    classes: int, dim: int, separation: float, rng: np.random.Generator
) -> Matrix:
    """First ``classes`` points of a centred, rotated cubic grid.

    The grid spacing is ``separation``, so no two points are closer than that.
    """
    side = 1
    while side**dim < classes:
        side += 1
    grid = np.indices((side,) * dim).reshape(dim, -1).T[:classes].astype(float)
    grid -= grid.mean(axis=0)
    return separation * grid @ _random_rotation(dim, rng).T


def class_means(
    classes: int, dim: int, separation: float, rng: np.random.Generator
) -> Matrix:
    """Class means pairwise at least ``separation`` apart.

    A regular simplex (all distances equal) when it fits, a grid otherwise.
    """
    if separation < 0 or not np.isfinite(separation):
        raise GeneratorError(f"Separation must be finite and >= 0, got {separation}.")
    if separation == 0:
        return np.zeros((classes, dim))
    if classes <= dim + 1:
        return simplex_means(classes, dim, separation, rng)
    return lattice_means(classes, dim, separation, rng)


def gen_gaussian_mixture(
    classes: int,
    dim: int,
    per_class: int,
    separation: float,
    seed: int,
    noise: float = 1.0,
) -> Dataset:
    """Isotropic Gaussian classes around means at least ``separation`` apart."""
    if classes < 2 or dim < 1 or per_class < 1:
        raise InvalidArgument(
            f"Need classes >= 2, dim >= 1 and per_class >= 1,"
            f" got {classes}, {dim}, {per_class}."
        )
    if noise < 0:
        raise InvalidArgument(f"noise must be nonnegative, got {noise}.")
    rng = _data_rng(seed)
    means = class_means(classes, dim, separation, rng)
    labels = np.repeat(np.arange(classes), per_class)
    inputs = means[labels] + noise * rng.normal(size=(labels.size, dim))
    order = rng.permutation(labels.size)
    return Dataset(
        inputs[order],
        labels[order],
        classes,
        provenance=(
            f"gaussian-mixture(classes={classes},dim={dim},per_class={per_class},"
            f"separation={separation:g},noise={noise:g},seed={seed})"
        ),
    )


def two_moons_arcs(count: int) -> tuple[Matrix, npt.NDArray[np.int64]]:
    """Noise-free interleaved half circles; class 0 gets the extra point."""
    n_outer = (count + 1) // 2
    n_inner = count // 2
    t_outer = np.linspace(0.0, np.pi, n_outer)
    t_inner = np.linspace(0.0, np.pi, n_inner)
    outer = np.column_stack([np.cos(t_outer), np.sin(t_outer)])
    inner = np.column_stack([1.0 - np.cos(t_inner), 0.5 - np.sin(t_inner)])
    labels = np.concatenate([np.zeros(n_outer, np.int64), np.ones(n_inner, np.int64)])
    return np.concatenate([outer, inner]), labels


def gen_two_moons(count: int, noise: float, seed: int) -> Dataset:
    if count < 2:
        raise InvalidArgument(f"Two moons needs at least 2 points, got {count}.")
    if noise < 0:
        raise InvalidArgument(f"noise must be nonnegative, got {noise}.")
    rng = _data_rng(seed)
    inputs, labels = two_moons_arcs(count)
    inputs = inputs + noise * rng.normal(size=inputs.shape)
    order = rng.permutation(count)
    return Dataset(
        inputs[order],
        labels[order],
        2,
        provenance=f"two-moons(count={count},noise={noise:g},seed={seed})",
    )


def pseudo_label(
    unlabeled: npt.ArrayLike, spec: ModelSpec, theta_base: LayeredParams
) -> Dataset:
    """Label inputs with the base model's predictions and flag them as pseudo."""
    inputs = np.atleast_2d(np.asarray(unlabeled, dtype=np.float64))
    spec.check(theta_base)
    if inputs.shape[1] != spec.input_dim:
        raise InvalidArgument(
            f"Unlabeled inputs have dimension {inputs.shape[1]},"
            f" base model expects {spec.input_dim}."
        )
    return Dataset(
        inputs.copy(),
        predict_batch(spec, theta_base, inputs),
        spec.class_count,
        np.ones(inputs.shape[0], dtype=bool),
        provenance=f"pseudo-labeled({spec.architecture})",
    )


def gaussian_noisy_copies(
    dataset: Dataset, copies: int, sigma: float, seed: int
) -> Dataset:
    """Each sample repeated ``copies`` times with N(0, sigma^2) input noise."""
    if copies < 1:
        raise InvalidArgument(f"copies must be at least 1, got {copies}.")
    if sigma < 0:
        raise InvalidArgument(f"sigma must be nonnegative, got {sigma}.")
    inputs = np.repeat(dataset.inputs, copies, axis=0)
    if sigma > 0:
        inputs = inputs + sigma * _data_rng(seed, 1).normal(size=inputs.shape)
    return Dataset(
        inputs,
        np.repeat(dataset.labels, copies),
        dataset.class_count,
        np.repeat(dataset.is_pseudo, copies),
        provenance=f"{dataset.provenance}+noisy-copies({copies},{sigma:g},{seed})",
    )


def gen_unlabeled_points(
    count: int, dim: int, seed: int, scale: float = 1.0
) -> Dataset:
    """Standard normal points scaled by ``scale``, all carrying label 0.

    Used as samples of the quadratic game, whose loss ignores labels."""
    if count < 1 or dim < 1:
        raise InvalidArgument(f"Need count, dim >= 1, got {count}, {dim}.")
    inputs = scale * _data_rng(seed).normal(size=(count, dim))
    return Dataset(
        inputs,
        np.zeros(count, np.int64),
        2,
        provenance=f"points(count={count},dim={dim},scale={scale:g},seed={seed})",
    )
