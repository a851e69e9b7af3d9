import pytest

from pdte.cost import DATASETS, CostReport, DatasetSpec, bench, cost_predict


def test_dataset_specs():
    shapes = {k: (v.n, v.d, v.m) for k, v in DATASETS.items()}
    assert shapes == {
        "heart-disease": (13, 3, 5),
        "housing": (13, 13, 92),
        "spambase": (57, 17, 58),
        "artificial": (16, 10, 500),
    }


def test_predictions():
    assert cost_predict("int", 16, 10).max_depth == 5
    assert cost_predict("bin", 16, 10).max_depth == 10
    assert cost_predict("bin", 16, 10, "label").output_ctxt_count == 1
    assert cost_predict("bin", 16, 10).output_ctxt_count == 10
    assert cost_predict("int", 16, 10, "output", slots=64).output_ctxt_count == 16
    assert cost_predict("int", 16, 10).output_ctxt_count == 1024
    with pytest.raises(ValueError):
        cost_predict("tfhe", 16, 10)


def test_report_text_round_trip():
    r = CostReport(10, 20, 3, 7, 1, 2.5)
    assert r.to_text().splitlines()[0] == "mult_count=10"
    assert CostReport.from_text(r.to_text()) == r
    assert CostReport.from_text(CostReport(max_depth=4).to_text()) == CostReport(max_depth=4)
    with pytest.raises(ValueError):
        CostReport.from_text("speed=9")


def test_heart_disease_bench_counts_comparisons():
    res = bench(DATASETS["heart-disease"], "bin", seed=7)
    assert res.correct and res.report.comparison_count == 5
    assert res.report.max_depth <= res.predicted.max_depth


def test_bench_is_deterministic():
    for scheme in ("bin", "int"):
        a = bench(DATASETS["heart-disease"], scheme, seed=3)
        b = bench(DATASETS["heart-disease"], scheme, seed=3)
        assert a.report == b.report and a.label == b.label


@pytest.mark.parametrize("scheme, packing", [("bin", "none"), ("bin", "label"), ("bin", "thresh"), ("int", "none"), ("int", "output")])
@pytest.mark.parametrize("mu", [1, 4, 8, 16])
@pytest.mark.parametrize("d", [1, 3, 6, 10])
def test_measured_within_predicted(scheme, packing, mu, d):
    res = bench(DatasetSpec("grid", 3, d, d), scheme, mu, packing, slots=16, seed=mu * d)
    assert res.correct
    assert res.report.max_depth <= res.predicted.max_depth
    assert res.report.output_ctxt_count == res.predicted.output_ctxt_count


def test_attribute_packing_amortizes():
    res = bench(DATASETS["heart-disease"], "bin", 8, "attr", slots=16, seed=1)
    assert res.correct and len(res.label) == 16
    assert res.report.amortized_per_slot == res.report.mult_count / 16
