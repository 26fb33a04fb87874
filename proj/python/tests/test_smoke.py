import json

import numpy as np
import pytest

import fairaudit as fa


@pytest.fixture(scope="module")
def split_data():
    data = fa.synth_biased(400, 4, 1.0, 7)
    return fa.split(data, 0.8, 7)


def test_dataset_roundtrip():
    x = np.array([[0.0, 1.0], [1.0, 0.0], [2.0, 2.0]])
    d = fa.Dataset(x, [0, 1, 1], [1, 0, 1], ["a", "b"], ["r1", "r2", "r3"])
    assert len(d) == 3
    assert d.feature_names == ["a", "b"]
    np.testing.assert_allclose(d.x, x)


def test_train_and_predict(split_data):
    train, test = split_data
    model = fa.train("logistic", train)
    p = np.asarray(model.predict_proba(test.x))
    assert p.shape == (len(test),)
    assert np.all((p >= 0) & (p <= 1))
    clone = fa.TrainedModel.from_json(model.to_json())
    np.testing.assert_allclose(clone.predict_proba(test.x), p)


def test_shap_efficiency(split_data):
    train, test = split_data
    model = fa.train("forest", train, {"n_trees": 5, "max_depth": 3})
    bg = fa.Background.sample(train, 20, 1)
    x = list(test.x[0])
    exact = fa.exact_shap(model, x, bg)
    tree = fa.tree_shap(model, x, bg)
    assert sum(exact["phi"]) == pytest.approx(exact["fx"] - exact["base_value"], abs=1e-9)
    np.testing.assert_allclose(exact["phi"], tree["phi"], atol=1e-9)


def test_mitigation_and_comparison(split_data):
    train, test = split_data
    mix = fa.exponentiated_gradient("logistic", train, eps=0.05, max_iters=20)
    assert sum(mix.weights) == pytest.approx(1.0)
    assert len(mix.history) >= 1
    bg = fa.Background.sample(train, 20, 1)
    base = fa.train("logistic", train)
    pre = fa.explain_testset(base, test, bg, "exact")
    post = fa.explain_testset(mix, test, bg, "exact")
    rows = fa.compare_rankings(pre, post, test)
    assert [r["group"] for r in rows] == ["overall", "black", "nonblack"]
    assert all(-1.0 <= r["rho"] <= 1.0 for r in rows)


def test_metrics_and_stats():
    m = fa.predictive_metrics([0.9, 0.2, 0.7, 0.4], [1, 0, 0, 1])
    assert m["accuracy"] == pytest.approx(0.5)
    eod, tpr, fpr = fa.eod_difference([1, 0, 1, 1], [1, 0, 1, 0], [0, 0, 1, 1])
    assert eod == pytest.approx(max(tpr, fpr))
    assert fa.spearman_rho([4, 3, 2, 1], [4, 3, 2, 1]) == pytest.approx(1.0)
    assert fa.spearman_pvalue(0.7, 10) == pytest.approx(0.024206343749999998, rel=1e-9)


def test_errors_carry_code():
    with pytest.raises(fa.FairauditError) as info:
        fa.train("unknown", fa.synth_biased(50, 3, 1.0, 1))
    assert info.value.code


def test_run_audit(tmp_path):
    config = {
        "name": "smoke",
        "dataset": {"synthetic": {"n": 300, "d": 4, "bias_strength": 1.0, "seed": 3}},
        "seed": 3,
        "models": ["logistic"],
        "mitigation": {"eps": 0.05, "max_iters": 10},
        "explain": {"background_size": 20},
    }
    report = fa.run_audit(config, tmp_path, tmp_path / "out")
    assert report["status"] == "complete"
    assert (tmp_path / "out" / "report.json").exists()
    assert json.loads((tmp_path / "out" / "report.json").read_text())["config_hash"] == report["config_hash"]
