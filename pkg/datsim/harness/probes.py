"""Property experiments checking the measurable consequences of the theory."""
import math
import os
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, Dict, List, Optional, Tuple, Union

import numpy as np

from datsim.attack.config import AttackConfig
from datsim.attack.oracles import solve
from datsim.attack.quadratic import QuadraticInnerSpec, approx_gap_check
from datsim.compress.quantizer import (
    QuantizerConfig,
    decoded_mean,
    squared_errors,
    stored_norm,
    variance_bound,
)
from datsim.core import Tags
from datsim.core.params import LayeredParams
from datsim.core.registry import Registry
from datsim.core.rng import SERVER_ID, SeededRng
from datsim.core.utils import async_to_sync
from datsim.data.generators import gen_gaussian_mixture, gen_unlabeled_points
from datsim.models.zoo import ModelSpec, init_params
from datsim.optim.outer import SgdMomentum
from datsim.optim.schedule import LearningRateSchedule
from datsim.runtime.cluster import ClusterRuntime, RoundMetrics
from datsim.runtime.config import ClusterConfig
from datsim.runtime.objective import ClassifierObjective, QuadraticGame
from datsim.runtime.probes import variance_probe_block

from .config import (
    OUTPUT_DIR_ENV,
    ClusterSection,
    DatasetSection,
    ExperimentConfig,
    ModelSection,
    OptimizerSection,
    OutputSection,
)
from .evaluation import eval_robust, fosp_metric
from .experiment import build_optimizer, build_workload

# unbiasedness and variance checks allow this many standard errors
MEAN_SE = 4.0
VARIANCE_SE = 3.0
QUANTIZER_VECTORS = 20
SLOPE_TOLERANCE = 0.15
BIT_WIDTH_BAND = 0.10
TAIL_ROUNDS = 20
RA_MARGIN = 0.02
LARGE_BATCH_DECAY = (0.5, 0.75)


@dataclass
class ProbeReport:
    name: str
    passed: bool
    lines: List[str] = field(default_factory=list)
    values: Dict[str, float] = field(default_factory=dict)

    def render(self) -> str:
        status = "PASS" if self.passed else "FAIL"
        return "\n".join([f"{self.name}: {status}", *self.lines]) + "\n"


ProbeFn = Callable[[int, bool], ProbeReport]

probes: Registry[ProbeFn] = Registry("probe")


def _stream(seed: int, round_: int) -> SeededRng:
    return SeededRng.for_stream(seed, SERVER_ID, round_, Tags.PROBE)


@probes.register()
def quantizer(seed: int, quick: bool) -> ProbeReport:
    """Quantizer unbiasedness (4 SE) and variance bound min{d/s^2, sqrt(d)/s} (3 SE).

    Each (d, b) pair is checked on QUANTIZER_VECTORS random vectors. Over that
    many components a few land beyond 4 SE by chance, so the count of such
    components is held to its binomial allowance.
    """
    mean_trials = 10**4 if quick else 10**5
    var_trials = 10**3 if quick else 10**4
    gen = _stream(seed, 0).generator()
    report = ProbeReport("quantizer", True)
    outside = 0
    compared = 0
    stream = 0
    for dim in (16, 256):
        for bits in (1, 2, 4, 8, 32):
            pair_outside = 0
            worst = 0.0
            within = True
            bound = variance_bound(dim, bits)
            for _ in range(QUANTIZER_VECTORS):
                stream += 2
                g = gen.normal(size=dim)
                norm = stored_norm(g)
                mean, se = decoded_mean(g, bits, mean_trials, _stream(seed, stream))
                # one upward draw moves the mean by this much
                se = np.maximum(se, norm / (2**bits * mean_trials))
                pair_outside += int(np.sum(np.abs(mean - g) > MEAN_SE * se))
                rel = squared_errors(g, bits, var_trials, _stream(seed, stream + 1))
                rel = rel / norm**2
                estimate = float(rel.mean())
                slack = VARIANCE_SE * float(rel.std(ddof=1)) / np.sqrt(var_trials)
                within &= estimate <= bound + slack
                worst = max(worst, estimate)
            outside += pair_outside
            compared += QUANTIZER_VECTORS * dim
            report.passed &= within
            report.values[f"variance_d{dim}_b{bits}"] = worst
            report.lines.append(
                f"d={dim} b={bits}: {pair_outside} components beyond {MEAN_SE:g} SE,"
                f" max relative variance {worst:.3e} (bound {bound:.3e})"
            )
    expected = compared * math.erfc(MEAN_SE / math.sqrt(2.0))
    allowed = int(math.ceil(expected + MEAN_SE * math.sqrt(expected)))
    report.passed &= outside <= allowed
    report.values["outside_se"] = outside
    report.values["allowed_outside_se"] = allowed
    report.lines.append(
        f"{outside} of {compared} components beyond {MEAN_SE:g} SE"
        f" (allowed {allowed}, expected {expected:.2f})"
    )
    return report


@probes.register("variance-scaling")
def variance_scaling(seed: int, quick: bool) -> ProbeReport:
    """Slope of log Var(g_hat) against log(M B) is -1 within 0.15."""
    trials = 40 if quick else 100
    data = gen_gaussian_mixture(2, 4, 4096, 2.0, seed)
    spec = ModelSpec.linear(4, 2)
    theta = init_params(spec, _stream(seed, 0).generator())
    objective = ClassifierObjective(spec)
    attack = AttackConfig.pgd(0.1, steps=3)
    xs, ys = [], []
    report = ProbeReport("variance-scaling", True)
    for workers in (1, 2, 4, 8):
        for batch in (8, 32, 128):
            cfg = ClusterConfig(
                workers=workers,
                per_worker_batch=batch,
                attack=attack,
                seed=seed,
                parallel=False,
            )
            var = variance_probe_block(theta, objective, data, cfg, trials)
            xs.append(np.log(workers * batch))
            ys.append(np.log(var.variance))
            report.lines.append(f"M={workers} B={batch}: Var={var.variance:.4e}")
    slope = float(np.polyfit(xs, ys, 1)[0])
    report.values["slope"] = slope
    report.passed = abs(slope + 1.0) <= SLOPE_TOLERANCE
    report.lines.append(f"log-log slope {slope:.3f} (expected -1 +- {SLOPE_TOLERANCE})")
    return report


@probes.register("lemma-a1", aliases=["inner-gap"])
def inner_gap(seed: int, quick: bool) -> ProbeReport:
    """Approximate inner solutions keep the outer-gradient gap within the target."""
    count = 200 if quick else 1000
    gen = _stream(seed, 0).generator()
    holds = 0
    for k in range(count):
        spec = QuadraticInnerSpec.random(
            gen,
            dim=int(gen.integers(1, 8)),
            theta_dim=3,
            epsilon=float(gen.uniform(0.1, 2.0)),
        )
        cfg = AttackConfig.pgd(
            spec.epsilon, steps=int(gen.integers(1, 6)), init="uniform"
        )
        delta = solve(spec, cfg, _stream(seed, k + 1))
        first = approx_gap_check(spec, delta, 1.0)
        # the smallest target for which delta qualifies
        target = max(first.criterion, 0.0) * spec.cross_lipschitz**2 / spec.mu
        check = approx_gap_check(spec, delta, target * (1.0 + 1e-9) + 1e-12)
        holds += int(check.is_eps_approx and check.bound_holds)
    report = ProbeReport("lemma-a1", holds == count)
    report.values["holds"] = holds
    report.lines.append(f"bound held on {holds} of {count} random specs")
    return report


def _moons_config(
    seed: int,
    quick: bool,
    optimizer: OptimizerSection,
    workers: int = 8,
    per_worker_batch: int = 32,
) -> ExperimentConfig:
    return ExperimentConfig(
        name=f"moons-{optimizer.kind}-{workers}x{per_worker_batch}-{seed}",
        dataset=DatasetSection(
            generator="two-moons", count=512 if quick else 1024, noise=0.1, seed=seed
        ),
        train_attack=AttackConfig.pgd(0.1, steps=5),
        epochs=30.0 if quick else 60.0,
        model=ModelSection(hidden=(16,)),
        cluster=ClusterSection(
            workers=workers,
            per_worker_batch=per_worker_batch,
            seed=seed,
            parallel=False,
        ),
        optimizer=optimizer,
        output=OutputSection(checkpoint=False),
    )


async def _final_ra(cfg: ExperimentConfig) -> float:
    work = build_workload(cfg)
    assert work.model is not None
    runtime = ClusterRuntime(
        cfg.cluster_config(len(work.train)),
        work.objective,
        work.train,
        build_optimizer(cfg, len(work.train)),
        work.model,
    )
    result = await runtime.run(work.theta0)
    return eval_robust(
        work.model, result.theta, work.test, cfg.eval_attack_config(), cfg.cluster.seed
    )


@probes.register("large-batch-lalr")
def large_batch_lalr(seed: int, quick: bool) -> ProbeReport:
    """At 8x total batch, LAMB with layerwise rates matches or beats momentum SGD.

    SGD keeps the rate tuned for per-worker batches. LAMB runs at a larger
    base rate with the lower clip at 1, so that zero-initialized biases move.
    """
    report = ProbeReport("large-batch-lalr", False)
    lamb_section = OptimizerSection(
        kind="lamb-lalr", lr=0.1, decay_fractions=LARGE_BATCH_DECAY, c_l=1.0
    )
    sgd_section = OptimizerSection(
        kind="sgd-momentum", lr=0.05, decay_fractions=LARGE_BATCH_DECAY
    )
    wins = 0
    seeds = [seed + k for k in range(3)]
    for s in seeds:
        lamb = async_to_sync(_final_ra)(_moons_config(s, quick, lamb_section))
        sgd = async_to_sync(_final_ra)(_moons_config(s, quick, sgd_section))
        wins += int(lamb >= sgd)
        report.values[f"ra_lamb_lalr_{s}"] = lamb
        report.values[f"ra_sgd_momentum_{s}"] = sgd
        report.lines.append(
            f"seed {s}: RA lamb-lalr {lamb:.3f}, sgd-momentum {sgd:.3f}"
        )
    report.passed = 2 * wins > len(seeds)
    return report


async def _tail_fosp(seed: int, bits: int, rounds: int) -> float:
    """Mean stationarity gap over the last rounds of a quantized toy game run."""
    game = QuadraticGame.random(_stream(seed, 0).generator(), theta_dim=16, delta_dim=4)
    data = gen_unlabeled_points(128, 16, seed)
    attack = AttackConfig.exact(10.0)
    cfg = ClusterConfig(
        workers=4,
        per_worker_batch=4,
        quantizer=QuantizerConfig(bits, "one-sided"),
        attack=attack,
        rounds=rounds,
        seed=seed,
        parallel=False,
    )
    optimizer = SgdMomentum(
        LearningRateSchedule.constant(1.0 / np.sqrt(rounds)), weight_decay=0.0
    )
    runtime = ClusterRuntime(cfg, game, data, optimizer)
    gaps: List[float] = []

    def record(metrics: RoundMetrics, theta: LayeredParams) -> None:
        if metrics.round_ >= rounds - TAIL_ROUNDS:
            gaps.append(fosp_metric(game, theta, data, attack, 0.0, seed))

    runtime.set_callback(record)
    await runtime.run(LayeredParams.zeros(game.layout))
    return float(np.mean(gaps))


@probes.register("quantization-bits")
def quantization_bits(seed: int, quick: bool) -> ProbeReport:
    """Final FOSP gap of a toy run does not grow with the bit width (10% band)."""
    rounds = 200 if quick else 500
    seeds = [seed + k for k in range(3)]
    report = ProbeReport("quantization-bits", True)
    means = []
    for bits in (2, 4, 8, 32):
        # batches and games are shared across bit widths, only quantizer noise differs
        mean = float(
            np.mean([async_to_sync(_tail_fosp)(s, bits, rounds) for s in seeds])
        )
        means.append(mean)
        report.values[f"fosp_b{bits}"] = mean
        report.lines.append(f"b={bits}: fosp {mean:.4e} (mean of {len(seeds)} seeds)")
    for prev, cur in zip(means, means[1:]):
        report.passed &= cur <= (1.0 + BIT_WIDTH_BAND) * prev + 1e-12
    return report


@probes.register("robustness-sanity")
def robustness_sanity(seed: int, quick: bool) -> ProbeReport:
    """DAT on two moons reaches the RA of a centralized run within 2 points."""
    optimizer = OptimizerSection(kind="sgd-momentum", lr=0.05)
    distributed = async_to_sync(_final_ra)(
        _moons_config(seed, quick, optimizer, workers=4, per_worker_batch=32)
    )
    central = async_to_sync(_final_ra)(
        _moons_config(seed, quick, optimizer, workers=1, per_worker_batch=128)
    )
    report = ProbeReport("robustness-sanity", distributed >= central - RA_MARGIN)
    report.values["ra_distributed"] = distributed
    report.values["ra_centralized"] = central
    report.lines.append(
        f"RA distributed (M=4) {distributed:.3f}, centralized {central:.3f}"
    )
    return report


def run_probe(name: str, seed: int = 0, quick: bool = False) -> ProbeReport:
    return probes[name].run(seed, quick)


def write_report(report: ProbeReport, directory: Union[str, Path]) -> Path:
    path = Path(directory) / f"probe-{report.name}.txt"
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(report.render(), encoding="utf-8")
    return path


def probe_dir() -> Path:
    return Path(os.environ.get(OUTPUT_DIR_ENV, "runs")) / "probes"


def probe_suite(
    which: Optional[str] = None,
    output_dir: Optional[Union[str, Path]] = None,
    seed: int = 0,
    quick: bool = False,
) -> List[Tuple[ProbeReport, Path]]:
    """Run one probe (or all of them) and write a report file for each."""
    names = list(probes) if which is None else [which]
    directory = probe_dir() if output_dir is None else Path(output_dir)
    out = []
    for name in names:
        report = run_probe(name, seed, quick)
        out.append((report, write_report(report, directory)))
    return out
