"""End-to-end experiments: data, model, training, periodic evaluation, CSVs."""
import csv
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional, Sequence, TextIO, Union

from datsim.core import Tags
from datsim.core.errors import InvalidArgument
from datsim.core.params import LayeredParams
from datsim.core.rng import SERVER_ID, SeededRng
from datsim.core.utils import async_to_sync
from datsim.data.dataset import Dataset, train_test_split
from datsim.data.generators import (
    gaussian_noisy_copies,
    gen_gaussian_mixture,
    gen_two_moons,
    gen_unlabeled_points,
    pseudo_label,
)
from datsim.models.zoo import ModelSpec, init_params
from datsim.optim.outer import OuterOptimizer, make_optimizer
from datsim.runtime.checkpoint import load_checkpoint
from datsim.runtime.cluster import PHASES, ClusterRuntime, RoundMetrics
from datsim.runtime.objective import (
    ClassifierObjective,
    QuadraticGame,
    RobustObjective,
)

from .config import ConfigError, DatasetSection, ExperimentConfig, load_config
from .evaluation import EvalReport, evaluate, fosp_metric

METRICS_COLUMNS = (
    "round",
    "epoch",
    "train_loss",
    "grad_norm",
    "fosp",
    "ta",
    "ra",
    "bits_up",
    "bits_down",
    "wall_ms_attack",
    "wall_ms_grad",
    "wall_ms_agg",
    "wall_ms_step",
)
EVAL_COLUMNS = ("round", "epoch", "ta", "ra", "fosp", "eps", "steps")

METRICS_FILE = "metrics.csv"
EVAL_FILE = "eval.csv"


@dataclass
class Workload:
    objective: RobustObjective
    model: Optional[ModelSpec]
    train: Dataset
    test: Dataset
    theta0: LayeredParams


@dataclass
class EvalRow:
    round_: int
    epoch: float
    ta: Optional[float]
    ra: Optional[float]
    fosp: float
    eps: float
    steps: int

    def cells(self) -> List[str]:
        return [
            str(self.round_),
            _fmt(self.epoch),
            _fmt(self.ta),
            _fmt(self.ra),
            _fmt(self.fosp),
            _fmt(self.eps),
            str(self.steps),
        ]


@dataclass
class ExperimentResult:
    theta: LayeredParams
    metrics: List[RoundMetrics]
    evals: List[EvalRow] = field(default_factory=list)
    output_dir: Optional[Path] = None
    checkpoint: Optional[Path] = None


def _fmt(value: Optional[float]) -> str:
    if value is None:
        return ""
    return repr(float(value))


def _generate(
    section: DatasetSection, seed: int, count: Optional[int] = None
) -> Dataset:
    if section.generator == "gaussian-mixture":
        per_class = (
            section.per_class
            if count is None
            else int(math.ceil(count / section.classes))
        )
        return gen_gaussian_mixture(
            section.classes,
            section.dim,
            per_class,
            section.separation,
            seed,
            section.noise,
        )
    if section.generator == "two-moons":
        size = section.count if count is None else count
        return gen_two_moons(size, section.noise, seed)
    return gen_unlabeled_points(
        section.count if count is None else count, section.dim, seed, section.noise
    )


def build_datasets(
    cfg: ExperimentConfig, spec: Optional[ModelSpec]
) -> tuple[Dataset, Dataset]:
    section = cfg.dataset
    full = _generate(section, section.seed)
    train, test = train_test_split(full, section.test_fraction, section.seed)
    if section.unlabeled:
        if section.base_checkpoint is None or spec is None:
            raise ConfigError(
                "dataset.base_checkpoint",
                None,
                "pseudo-labeling unlabeled data needs a classifier base checkpoint",
            )
        base = load_checkpoint(section.base_checkpoint)
        pool = _generate(section, section.seed + 1, section.unlabeled)
        train = train.concat(
            pseudo_label(pool.inputs[: section.unlabeled], spec, base.theta)
        )
    if section.noisy_copies > 1 or section.copy_sigma > 0:
        train = gaussian_noisy_copies(
            train, section.noisy_copies, section.copy_sigma, section.seed
        )
    return train, test


def build_workload(cfg: ExperimentConfig) -> Workload:
    init_rng = SeededRng.for_stream(cfg.cluster.seed, SERVER_ID, 0, Tags.INIT)
    if cfg.game is not None:
        train, test = build_datasets(cfg, None)
        game = QuadraticGame.random(
            SeededRng.for_stream(cfg.game.seed, SERVER_ID, 0, Tags.INIT).generator(),
            train.input_dim,
            cfg.game.delta_dim,
            cfg.game.coupling_norm,
            cfg.game.mu,
        )
        return Workload(game, None, train, test, LayeredParams.zeros(game.layout))
    section = cfg.dataset
    classes = 2 if section.generator == "two-moons" else section.classes
    input_dim = 2 if section.generator == "two-moons" else section.dim
    spec = ModelSpec(input_dim, classes, cfg.model.hidden, cfg.model.activation)
    train, test = build_datasets(cfg, spec)
    theta0 = init_params(spec, init_rng.generator(), cfg.model.init_scale)
    return Workload(ClassifierObjective(spec), spec, train, test, theta0)


def build_optimizer(cfg: ExperimentConfig, train_size: int) -> OuterOptimizer:
    opt = cfg.optimizer
    return make_optimizer(
        opt.kind,
        cfg.schedule(train_size),
        weight_decay=opt.weight_decay,
        momentum=opt.momentum,
        c_l=opt.c_l,
        c_u=opt.c_u,
    )


def _writer(handle: TextIO, columns: Sequence[str]):
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(columns)
    return writer


class _Recorder:
    """Writes one metrics row per round and one eval row per evaluation."""

    def __init__(
        self,
        cfg: ExperimentConfig,
        work: Workload,
        metrics_out: TextIO,
        eval_out: TextIO,
        progress: Optional[Callable[[RoundMetrics, Optional[EvalRow]], None]],
    ):
        self.cfg = cfg
        self.work = work
        self.total_rounds = cfg.total_rounds(len(work.train))
        self.per_epoch = cfg.rounds_per_epoch(len(work.train))
        self.metrics = _writer(metrics_out, METRICS_COLUMNS)
        self.evals = _writer(eval_out, EVAL_COLUMNS)
        self.eval_rows: List[EvalRow] = []
        self.progress = progress

    def _due(self, round_: int) -> bool:
        every = self.cfg.eval_every
        if round_ == self.total_rounds - 1:
            return True
        return every > 0 and (round_ + 1) % every == 0

    def _evaluate(self, round_: int, epoch: float, theta: LayeredParams) -> EvalRow:
        cfg, work = self.cfg, self.work
        fosp = fosp_metric(
            work.objective,
            theta,
            work.train,
            cfg.train_attack,
            cfg.cluster.lam,
            cfg.cluster.seed,
        )
        attack = cfg.eval_attack_config()
        ta = ra = None
        if work.model is not None:
            report = evaluate(
                work.model, theta, work.test, attack, cfg.cluster.seed, fosp, round_
            )
            ta, ra = report.ta, report.ra
        assert attack.steps is not None
        return EvalRow(round_, epoch, ta, ra, fosp, attack.epsilon, attack.steps)

    def __call__(self, metrics: RoundMetrics, theta: LayeredParams) -> None:
        epoch = (metrics.round_ + 1) / self.per_epoch
        row: Optional[EvalRow] = None
        if self._due(metrics.round_):
            row = self._evaluate(metrics.round_, epoch, theta)
            self.eval_rows.append(row)
            self.evals.writerow(row.cells())
        if self.cfg.output.record_wall_clock:
            wall = [f"{metrics.wall_ms[phase]:.3f}" for phase in PHASES]
        else:
            wall = ["", "", "", ""]
        self.metrics.writerow(
            [
                str(metrics.round_),
                _fmt(epoch),
                _fmt(metrics.train_loss),
                _fmt(metrics.grad_norm),
                _fmt(None if row is None else row.fosp),
                _fmt(None if row is None else row.ta),
                _fmt(None if row is None else row.ra),
                str(metrics.bits_up),
                str(metrics.bits_down),
                *wall,
            ]
        )
        if self.progress is not None:
            self.progress(metrics, row)


async def run_experiment_async(
    cfg: ExperimentConfig,
    progress: Optional[Callable[[RoundMetrics, Optional[EvalRow]], None]] = None,
) -> ExperimentResult:
    work = build_workload(cfg)
    cluster_cfg = cfg.cluster_config(len(work.train))
    out_dir = cfg.output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    runtime = ClusterRuntime(
        cluster_cfg,
        work.objective,
        work.train,
        build_optimizer(cfg, len(work.train)),
        work.model,
        out_dir if cfg.output.checkpoint else None,
    )
    metrics_path = out_dir / METRICS_FILE
    eval_path = out_dir / EVAL_FILE
    with open(metrics_path, "w", encoding="utf-8", newline="") as m_out, open(
        eval_path, "w", encoding="utf-8", newline=""
    ) as e_out:
        recorder = _Recorder(cfg, work, m_out, e_out, progress)
        runtime.set_callback(recorder)
        result = await runtime.run(work.theta0)
    return ExperimentResult(
        result.theta, result.metrics, recorder.eval_rows, out_dir, result.checkpoint
    )


def run_experiment(
    config: Union[str, Path, ExperimentConfig],
    progress: Optional[Callable[[RoundMetrics, Optional[EvalRow]], None]] = None,
) -> ExperimentResult:
    """Run the experiment described by a config file (or a parsed config)."""
    cfg = config if isinstance(config, ExperimentConfig) else load_config(config)
    return async_to_sync(run_experiment_async)(cfg, progress)


def evaluate_checkpoint(
    checkpoint: Union[str, Path], config: Union[str, Path, ExperimentConfig]
) -> tuple[EvalReport, EvalRow]:
    """Evaluate saved parameters on the config's test set; appends to the eval CSV."""
    cfg = config if isinstance(config, ExperimentConfig) else load_config(config)
    data = load_checkpoint(checkpoint)
    work = build_workload(cfg)
    if work.model is None:
        raise InvalidArgument("Only classifier checkpoints can be evaluated.")
    work.model.check(data.theta)
    fosp = fosp_metric(
        work.objective,
        data.theta,
        work.train,
        cfg.train_attack,
        cfg.cluster.lam,
        cfg.cluster.seed,
    )
    attack = cfg.eval_attack_config()
    report = evaluate(work.model, data.theta, work.test, attack, cfg.cluster.seed, fosp)
    assert attack.steps is not None
    row = EvalRow(
        data.round_,
        data.round_ / cfg.rounds_per_epoch(len(work.train)),
        report.ta,
        report.ra,
        fosp,
        attack.epsilon,
        attack.steps,
    )
    out_dir = cfg.output_dir()
    out_dir.mkdir(parents=True, exist_ok=True)
    path = out_dir / EVAL_FILE
    is_new = not path.exists() or path.stat().st_size == 0
    with open(path, "a", encoding="utf-8", newline="") as handle:
        writer = csv.writer(handle, lineterminator="\n")
        if is_new:
            writer.writerow(EVAL_COLUMNS)
        writer.writerow(row.cells())
    return report, row
