import pytest

from datsim.compress.quantizer import variance_bound
from datsim.core.registry import UnknownName
from datsim.harness.probes import (
    ProbeReport,
    probe_dir,
    probe_suite,
    probes,
    run_probe,
    write_report,
)


def test_registered_probes():
    assert set(probes) == {
        "quantizer",
        "variance-scaling",
        "lemma-a1",
        "large-batch-lalr",
        "quantization-bits",
        "robustness-sanity",
    }
    assert all(entry.description for entry in probes.values())
    with pytest.raises(UnknownName):
        run_probe("nope")


def test_report_file(tmp_path):
    report = ProbeReport("demo", False, ["first", "second"])
    path = write_report(report, tmp_path / "nested")
    assert path.name == "probe-demo.txt"
    assert path.read_text(encoding="utf-8") == "demo: FAIL\nfirst\nsecond\n"


def test_probe_dir(output_dir):
    assert probe_dir() == output_dir / "probes"


def test_inner_gap_probe(output_dir):
    ((report, path),) = probe_suite("lemma-a1", quick=True)
    assert report.passed
    assert report.values["holds"] == 200
    assert path == output_dir / "probes" / "probe-lemma-a1.txt"
    assert path.read_text(encoding="utf-8").startswith("lemma-a1: PASS")


def test_quantizer_probe():
    report = run_probe("quantizer", seed=3, quick=True)
    assert report.passed, report.render()
    assert len(report.lines) == 11
    assert report.values["outside_se"] <= report.values["allowed_outside_se"]
    for dim in (16, 256):
        for bits in (1, 2, 4, 8):
            bound = variance_bound(dim, bits)
            assert report.values[f"variance_d{dim}_b{bits}"] <= 1.1 * bound
    # 32-bit levels leave almost no quantization noise
    assert report.values["variance_d256_b32"] < 1e-15


@pytest.mark.slow
def test_variance_scaling_probe():
    report = run_probe("variance-scaling", quick=True)
    assert report.passed, report.render()


@pytest.mark.slow
def test_large_batch_lamb_matches_or_beats_sgd():
    report = run_probe("large-batch-lalr", quick=True)
    assert report.passed, report.render()
    assert {"ra_lamb_lalr_0", "ra_sgd_momentum_0"} <= set(report.values)
    assert len(report.lines) == 3


@pytest.mark.slow
def test_quantization_bits_probe():
    report = run_probe("quantization-bits", quick=True)
    assert report.passed, report.render()
    assert report.values["fosp_b32"] <= report.values["fosp_b2"]


@pytest.mark.slow
def test_robustness_sanity_probe():
    report = run_probe("robustness-sanity", quick=True)
    assert report.passed, report.render()
