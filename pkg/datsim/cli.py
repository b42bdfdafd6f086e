import asyncio
import sys
from functools import wraps
from typing import Dict, Optional

import click
from yachalk import chalk

from datsim._version import __version__
from datsim.compress.quantizer import (
    MAX_BITS,
    empirical_variance,
    quantize,
    raw_bits,
    stored_norm,
    variance_bound,
)
from datsim.compress.wire import serialize
from datsim.core import Tags
from datsim.core.errors import DatsimError
from datsim.core.rng import SERVER_ID, SeededRng
from datsim.core.tracing import get_tracer, setup_tracing, span
from datsim.harness.config import ConfigError, ConfigErrors, load_config
from datsim.harness.evaluation import EvalReport
from datsim.harness.experiment import (
    EvalRow,
    evaluate_checkpoint,
    run_experiment_async,
)
from datsim.harness.probes import probe_suite, probes
from datsim.runtime.cluster import RoundMetrics

tracer = get_tracer(__name__)

CONFIG_EXIT = 2
RUNTIME_EXIT = 1


def coro(f):
    @wraps(f)
    def wrapper(*args, **kwargs):
        return asyncio.run(f(*args, **kwargs))

    return wrapper


def _print_error(msg: str):
    print(chalk.red(msg), file=sys.stderr)


def exit_codes(f):
    """Map config failures to exit code 2 and any other failure to 1."""

    @wraps(f)
    async def wrapper(*args, **kwargs):
        try:
            return await f(*args, **kwargs)
        except (ConfigError, ConfigErrors) as e:
            _print_error(f"Invalid config:\n{e}")
            sys.exit(CONFIG_EXIT)
        except (DatsimError, OSError) as e:
            _print_error(f"{type(e).__name__}: {e}")
            sys.exit(RUNTIME_EXIT)

    return wrapper


def _print_outputs(outputs: Dict[str, object]):
    print(
        "\n".join(f"{chalk.bold.yellow(key)}: {val}" for key, val in outputs.items())
    )


def _print_report(report: EvalReport):
    _print_outputs(
        {
            "TA": f"{report.ta:.4f}",
            "RA": f"{report.ra:.4f}",
            "FOSP": "-" if report.fosp is None else f"{report.fosp:.6g}",
            "per-class": ", ".join(f"{acc:.4f}" for acc in report.per_class),
            "attack": report.attack.describe(),
        }
    )


def _progress(metrics: RoundMetrics, row: Optional[EvalRow]):
    if row is None:
        return
    ta = "-" if row.ta is None else f"{row.ta:.4f}"
    ra = "-" if row.ra is None else f"{row.ra:.4f}"
    print(
        f"{chalk.bold('round')} {metrics.round_:>6}"
        f"  loss {metrics.train_loss:.5f}  fosp {row.fosp:.4g}  TA {ta}  RA {ra}",
        flush=True,
    )


@click.group()
@click.version_option(__version__)
def cli():
    setup_tracing("datsim")


@cli.command()
@click.argument("config", type=click.Path(exists=True))
@click.option("--quiet", "-q", is_flag=True, help="Only print the final summary.")
@coro
@exit_codes
async def train(config: str, quiet: bool):
    """Run the experiment described by the CONFIG json file."""
    with span(tracer, name="train"):
        cfg = load_config(config)
        result = await run_experiment_async(cfg, None if quiet else _progress)
    print(chalk.bold.green(f"Success: trained {len(result.metrics)} rounds."))
    outputs: Dict[str, object] = {"output": result.output_dir}
    if result.checkpoint is not None:
        outputs["checkpoint"] = result.checkpoint
    if result.evals:
        last = result.evals[-1]
        outputs["TA"] = "-" if last.ta is None else f"{last.ta:.4f}"
        outputs["RA"] = "-" if last.ra is None else f"{last.ra:.4f}"
        outputs["FOSP"] = f"{last.fosp:.6g}"
    _print_outputs(outputs)


@cli.command(name="eval")
@click.argument("checkpoint", type=click.Path(exists=True))
@click.argument("config", type=click.Path(exists=True))
@coro
@exit_codes
async def eval_(checkpoint: str, config: str):
    """Evaluate CHECKPOINT on the test set of the CONFIG experiment."""
    with span(tracer, name="eval"):
        report, row = evaluate_checkpoint(checkpoint, config)
    print(chalk.bold.green(f"Success: evaluated round {row.round_}."))
    _print_report(report)


@cli.command()
@click.argument("which", type=click.Choice(probes.names()), required=False)
@click.option("--list", "list_", is_flag=True, help="List the available probes.")
@click.option("--quick", is_flag=True, help="Fewer trials, for smoke testing.")
@click.option("--seed", default=0, show_default=True)
@click.option(
    "--output-dir",
    type=click.Path(file_okay=False),
    help="Directory for report files, default <DATSIM_OUTPUT_DIR or runs>/probes",
)
@coro
@exit_codes
async def probe(
    which: Optional[str],
    list_: bool,
    quick: bool,
    seed: int,
    output_dir: Optional[str],
):
    """Run the WHICH property experiment, or all of them."""
    if list_:
        for name, entry in probes.items():
            print(chalk.bold.magenta(name))
            print(chalk.green(entry.description) + "\n")
        return
    with span(tracer, name="probe"):
        results = probe_suite(which, output_dir, seed, quick)
    failed = 0
    for report, path in results:
        status = chalk.bold.green("PASS") if report.passed else chalk.bold.red("FAIL")
        print(f"{chalk.bold.yellow(report.name)}: {status}  ({path})")
        for line in report.lines:
            print(f"    {line}")
        failed += not report.passed
    if failed:
        _print_error(f"{failed} of {len(results)} probes failed.")
        sys.exit(RUNTIME_EXIT)


@cli.command(name="quantize-bench")
@click.argument("d", type=click.IntRange(min=1))
@click.argument("b", type=click.IntRange(1, MAX_BITS))
@click.argument("trials", type=click.IntRange(min=1))
@click.option("--seed", default=0, show_default=True)
@coro
@exit_codes
async def quantize_bench(d: int, b: int, trials: int, seed: int):
    """Quantize a random D-dimensional vector at B bits over TRIALS draws."""
    with span(tracer, name="quantize-bench"):
        data = SeededRng.for_stream(seed, SERVER_ID, 0, Tags.DATA)
        g = data.generator().normal(size=d)
        msg = quantize(g, b, SeededRng.for_stream(seed, SERVER_ID, 0, Tags.QUANTIZE))
        stream = SeededRng.for_stream(seed, SERVER_ID, 1, Tags.QUANTIZE)
        variance = empirical_variance(g, b, trials, stream)
        relative = variance / stored_norm(g) ** 2
    _print_outputs(
        {
            "bits": msg.bits_used,
            "bytes": len(serialize(msg)),
            "raw bits": raw_bits(d),
            "relative variance": f"{relative:.6e}",
            "bound": f"{variance_bound(d, b):.6e}",
            "overflow": msg.overflow,
        }
    )
