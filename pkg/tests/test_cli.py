import click
import pytest
from click.testing import CliRunner
from utils import small_config, write_config

from datsim._version import __version__
from datsim.cli import cli


@pytest.fixture()
def runner() -> CliRunner:
    return CliRunner()


def _run(runner: CliRunner, *args: str):
    result = runner.invoke(cli, list(args))
    return result, click.unstyle(result.output)


def test_version(runner):
    result, out = _run(runner, "--version")
    assert result.exit_code == 0
    assert __version__ in out


def test_train_and_eval(runner, tmp_path, output_dir):
    config = write_config(tmp_path / "tiny.json", small_config())
    result, out = _run(runner, "train", str(config), "-q")
    assert result.exit_code == 0, out
    assert "Success: trained 4 rounds." in out
    assert "round " not in out
    checkpoint = output_dir / "tiny" / "final.ckpt"
    assert checkpoint.exists()

    result, out = _run(runner, "eval", str(checkpoint), str(config))
    assert result.exit_code == 0, out
    assert "Success: evaluated round 4." in out
    assert "TA: " in out and "RA: " in out


def test_train_prints_progress(runner, tmp_path, output_dir):
    config = write_config(tmp_path / "tiny.json", small_config())
    result, out = _run(runner, "train", str(config))
    assert result.exit_code == 0, out
    assert out.count("round ") == 2


def test_missing_field_exits_with_two(runner, tmp_path):
    raw = small_config()
    del raw["train_attack"]
    config = write_config(tmp_path / "bad.json", raw)
    result, out = _run(runner, "train", str(config))
    assert result.exit_code == 2
    assert "train_attack" in out and "missing required field" in out


def test_two_sided_all_reduce_exits_with_two(runner, tmp_path, output_dir):
    raw = small_config()
    raw["cluster"]["topology"] = "all-reduce"
    raw["cluster"]["quantizer"] = {"bits": 4, "mode": "two-sided"}
    config = write_config(tmp_path / "bad.json", raw)
    result, out = _run(runner, "train", str(config))
    assert result.exit_code == 2
    assert "cluster.quantizer.mode" in out
    assert not (output_dir / "tiny").exists()


def test_runtime_failure_exits_with_one(runner, tmp_path, output_dir):
    config = write_config(tmp_path / "tiny.json", small_config())
    assert _run(runner, "train", str(config), "-q")[0].exit_code == 0
    raw = small_config()
    raw["model"] = {"hidden": [4]}
    other = write_config(tmp_path / "wide.json", raw)
    checkpoint = output_dir / "tiny" / "final.ckpt"
    result, out = _run(runner, "eval", str(checkpoint), str(other))
    assert result.exit_code == 1
    assert "InvalidArgument" in out


def test_probe_list(runner):
    result, out = _run(runner, "probe", "--list")
    assert result.exit_code == 0
    for name in ("quantizer", "lemma-a1", "quantization-bits", "robustness-sanity"):
        assert name in out


def test_probe_run(runner, tmp_path):
    result, out = _run(
        runner, "probe", "lemma-a1", "--quick", "--output-dir", str(tmp_path)
    )
    assert result.exit_code == 0, out
    assert "lemma-a1: PASS" in out
    assert (tmp_path / "probe-lemma-a1.txt").exists()


def test_run_by_alias(runner, tmp_path):
    result, out = _run(
        runner, "probe", "inner-gap", "--quick", "--output-dir", str(tmp_path)
    )
    assert result.exit_code == 0, out
    assert (tmp_path / "probe-lemma-a1.txt").exists()


def test_unknown_probe(runner):
    result, _ = _run(runner, "probe", "nope")
    assert result.exit_code == 2


def test_quantize_bench(runner):
    result, out = _run(runner, "quantize-bench", "8", "4", "100")
    assert result.exit_code == 0, out
    assert "raw bits: 256" in out
    # 32 + 8 + 4 * 8 bits, plus an 8-bit bitmap when a level overflows
    expected = 10 if "overflow: True" in out else 9
    assert f"bytes: {expected}" in out


def test_quantize_bench_rejects_bits(runner):
    result, _ = _run(runner, "quantize-bench", "8", "0", "100")
    assert result.exit_code == 2
