import csv
import json
from pathlib import Path

import numpy as np
import pytest
from utils import separable_pair, small_config, write_config

from datsim.attack.config import AttackConfig
from datsim.core.errors import InvalidArgument
from datsim.core.params import LayeredParams
from datsim.data.dataset import Dataset
from datsim.harness.config import (
    ConfigError,
    ConfigErrors,
    ExperimentConfig,
    load_config,
    parse_config,
)
from datsim.harness.evaluation import (
    eval_robust,
    eval_standard,
    evaluate,
    fosp_metric,
    per_class_accuracy,
)
from datsim.harness.experiment import (
    EVAL_COLUMNS,
    EVAL_FILE,
    METRICS_COLUMNS,
    METRICS_FILE,
    build_datasets,
    build_workload,
    evaluate_checkpoint,
    run_experiment,
)
from datsim.models.zoo import ModelSpec
from datsim.runtime.objective import ClassifierObjective


def _parse(config) -> ExperimentConfig:
    return parse_config(json.dumps(config))


def _rows(path: Path):
    with open(path, encoding="utf-8", newline="") as handle:
        return list(csv.reader(handle))


@pytest.fixture()
def threshold():
    """Linear classifier predicting class 1 exactly when x > 0."""
    return ModelSpec.linear(1, 2), LayeredParams([[-1.0, 1.0], [0.0, 0.0]])


def test_parse_small_config():
    cfg = _parse(small_config())
    assert cfg.name == "tiny"
    assert cfg.dataset.per_class == 24 and cfg.dataset.test_fraction == 0.25
    assert cfg.train_attack == AttackConfig.pgd(0.1, steps=2)
    assert cfg.eval_attack_config().steps == 3
    assert cfg.cluster.quantizer.mode == "off"
    assert cfg.optimizer.kind == "sgd-momentum" and cfg.optimizer.lr == 0.05
    assert cfg.cluster_config(36).rounds == 4


def test_defaults_and_epochs():
    raw = small_config(overrides={"epochs": 2.0})
    del raw["rounds"], raw["eval_attack"]
    cfg = _parse(raw)
    assert cfg.total_rounds(36) == 6
    assert cfg.rounds_per_epoch(36) == 3.0
    default_eval = cfg.eval_attack_config()
    assert default_eval.kind == "pgd" and default_eval.steps == 20
    assert default_eval.epsilon == cfg.train_attack.epsilon


def test_unknown_field_reports_path_and_line():
    text = (
        '{\n  "name": "x",\n  "dataset": {},\n'
        '  "train_attack": {"epsilon": 0.1},\n'
        '  "cluster": {\n    "wrokers": 2\n  }\n}'
    )
    with pytest.raises(ConfigError) as err:
        parse_config(text)
    assert err.value.path == "cluster.wrokers"
    assert err.value.line == 5
    assert "unknown field" in str(err.value)


def test_missing_required_field():
    with pytest.raises(ConfigError) as err:
        parse_config('{"name": "x", "dataset": {}}')
    assert err.value.path == "train_attack"
    assert "missing required field" in str(err.value)


def test_all_errors_are_reported():
    raw = small_config()
    del raw["name"]
    raw["cluster"]["topology"] = "ring"
    with pytest.raises(ConfigErrors) as err:
        _parse(raw)
    paths = sorted(e.path for e in err.value.errors)
    assert paths == ["cluster.topology", "name"]
    assert "expected one of" in str(err.value)


def test_invalid_values_become_config_errors():
    raw = small_config()
    raw["cluster"]["quantizer"] = {"bits": 0, "mode": "one-sided"}
    with pytest.raises(ConfigError) as err:
        _parse(raw)
    assert err.value.path == "cluster.quantizer"

    raw = small_config(overrides={"rounds": "four"})
    with pytest.raises(ConfigError) as err:
        _parse(raw)
    assert err.value.path == "rounds"


def test_invalid_json_and_missing_file(tmp_path):
    with pytest.raises(ConfigError) as err:
        parse_config('{\n  "name": \n}')
    assert err.value.line == 3
    with pytest.raises(ConfigError):
        load_config(tmp_path / "absent.json")


def test_output_dir_follows_environment(output_dir):
    assert _parse(small_config("abc")).output_dir() == output_dir / "abc"


def test_standard_and_robust_accuracy(threshold):
    spec, theta = threshold
    data = separable_pair()
    assert eval_standard(spec, theta, data) == 1.0
    assert eval_robust(spec, theta, data, AttackConfig.pgd(1.0)) == 1.0
    assert eval_robust(spec, theta, data, AttackConfig.pgd(3.0)) == 0.0
    assert per_class_accuracy(spec, theta, data) == (1.0, 1.0)


def test_zero_radius_robust_accuracy_is_standard(mixture, linear_spec):
    theta = LayeredParams([[1.0, -0.5, 0.2, -1.0, 0.5, -0.2], [0.1, -0.1]])
    ta = eval_standard(linear_spec, theta, mixture)
    assert eval_robust(linear_spec, theta, mixture, AttackConfig.pgd(0.0)) == ta


def test_single_step_pgd_matches_fgsm(mixture, linear_spec):
    theta = LayeredParams([[1.0, -0.5, 0.2, -1.0, 0.5, -0.2], [0.1, -0.1]])
    pgd = AttackConfig.pgd(0.5, steps=1, step_size=0.5)
    fgsm = AttackConfig.fgsm(0.5, step_size=0.5)
    assert eval_robust(linear_spec, theta, mixture, pgd) == eval_robust(
        linear_spec, theta, mixture, fgsm
    )


def test_evaluation_rejects_empty_sets(threshold):
    spec, theta = threshold
    empty = Dataset(np.zeros((0, 1)), np.zeros(0, np.int64), 2)
    with pytest.raises(InvalidArgument):
        eval_standard(spec, theta, empty)


def test_evaluate_report(threshold):
    spec, theta = threshold
    data = separable_pair()
    attack = AttackConfig.pgd(3.0)
    fosp = fosp_metric(ClassifierObjective(spec), theta, data, attack, 0.0)
    report = evaluate(spec, theta, data, attack, fosp=fosp)
    assert (report.ta, report.ra) == (1.0, 0.0)
    assert report.fosp == fosp and fosp > 0
    assert report.attack == attack


def test_noisy_copies_grow_training_set():
    raw = small_config()
    raw["dataset"]["noisy_copies"] = 3
    raw["dataset"]["copy_sigma"] = 0.05
    train, test = build_datasets(_parse(raw), None)
    assert (len(train), len(test)) == (108, 12)


def test_pseudo_labels_need_base_checkpoint():
    raw = small_config()
    raw["dataset"]["unlabeled"] = 10
    with pytest.raises(ConfigError) as err:
        build_workload(_parse(raw))
    assert err.value.path == "dataset.base_checkpoint"


def test_run_experiment_outputs(output_dir):
    seen = []
    result = run_experiment(
        _parse(small_config()), lambda metrics, row: seen.append(row is not None)
    )
    assert result.output_dir == output_dir / "tiny"
    assert seen == [False, True, False, True]
    assert [row.round_ for row in result.evals] == [1, 3]

    metrics = _rows(result.output_dir / METRICS_FILE)
    assert metrics[0] == list(METRICS_COLUMNS)
    assert [row[0] for row in metrics[1:]] == ["0", "1", "2", "3"]
    assert metrics[1][4] == "" and metrics[2][4] != ""
    # wall-clock columns stay empty unless requested
    assert all(cell == "" for row in metrics[1:] for cell in row[-4:])

    evals = _rows(result.output_dir / EVAL_FILE)
    assert evals[0] == list(EVAL_COLUMNS)
    assert [row[0] for row in evals[1:]] == ["1", "3"]
    assert (result.output_dir / "final.ckpt").exists()


@pytest.mark.parametrize("workers", [2, 8])
def test_runs_are_byte_identical(tmp_path, monkeypatch, workers: int):
    raw = small_config()
    raw["cluster"] = {"workers": workers, "per_worker_batch": 3, "seed": 11}
    outputs = []
    for run in ("a", "b"):
        monkeypatch.setenv("DATSIM_OUTPUT_DIR", str(tmp_path / run))
        result = run_experiment(_parse(raw))
        assert result.output_dir is not None
        outputs.append(
            [
                (result.output_dir / name).read_bytes()
                for name in (METRICS_FILE, EVAL_FILE, "final.ckpt")
            ]
        )
    assert outputs[0] == outputs[1]


def test_zero_rounds_writes_headers_only(output_dir):
    result = run_experiment(_parse(small_config(overrides={"rounds": 0})))
    assert result.metrics == [] and result.evals == []
    assert _rows(output_dir / "tiny" / METRICS_FILE) == [list(METRICS_COLUMNS)]
    assert _rows(output_dir / "tiny" / EVAL_FILE) == [list(EVAL_COLUMNS)]


def test_wall_clock_columns(output_dir):
    raw = small_config(overrides={"rounds": 2})
    raw["output"] = {"record_wall_clock": True, "checkpoint": False}
    result = run_experiment(_parse(raw))
    assert result.checkpoint is None
    for row in _rows(output_dir / "tiny" / METRICS_FILE)[1:]:
        assert all(float(cell) >= 0 for cell in row[-4:])


def test_quadratic_game_experiment(output_dir):
    raw = {
        "name": "game",
        "dataset": {"generator": "points", "count": 40, "dim": 3},
        "game": {"delta_dim": 2},
        "train_attack": {"kind": "exact-quadratic", "epsilon": 5.0},
        "rounds": 3,
        "cluster": {"workers": 2, "per_worker_batch": 8},
        "optimizer": {"kind": "sgd-momentum", "lr": 0.1},
    }
    result = run_experiment(_parse(raw))
    assert len(result.metrics) == 3
    (row,) = result.evals
    assert row.ta is None and row.ra is None and row.fosp >= 0
    evals = _rows(output_dir / "game" / EVAL_FILE)
    assert evals[1][2:4] == ["", ""]


def test_evaluate_checkpoint_appends_row(tmp_path, output_dir):
    path = write_config(tmp_path / "tiny.json", small_config())
    result = run_experiment(path)
    assert result.checkpoint is not None
    report, row = evaluate_checkpoint(result.checkpoint, path)
    assert row.round_ == 4 and row.steps == 3
    assert row.ta == report.ta and row.ra == report.ra
    evals = _rows(output_dir / "tiny" / EVAL_FILE)
    assert [r[0] for r in evals[1:]] == ["1", "3", "4"]
    # the final in-run evaluation saw the same parameters
    assert evals[2][2:5] == evals[3][2:5]


@pytest.mark.parametrize(
    "section, values, path",
    [
        (
            "cluster",
            {"topology": "all-reduce", "quantizer": {"bits": 4, "mode": "two-sided"}},
            "cluster.quantizer.mode",
        ),
        ("cluster", {"seed": -1}, "cluster.seed"),
        ("optimizer", {"lr": 0.0}, "optimizer.lr"),
        ("optimizer", {"c_l": 2.0, "c_u": 1.0}, "optimizer.c_u"),
        ("dataset", {"seed": -3}, "dataset.seed"),
    ],
)
def test_cross_field_checks_name_the_field(section, values, path):
    raw = small_config()
    raw.setdefault(section, {}).update(values)
    with pytest.raises(ConfigError) as err:
        _parse(raw)
    assert err.value.path == path
    assert err.value.line is not None
