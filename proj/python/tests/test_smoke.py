import json
import math

import pytest

import lopred


def test_time_and_views():
    events = [("enter", 0), ("background", 2000), ("foreground", 5000), ("exit", 12000)]
    assert lopred.time_spent(events) == pytest.approx(9.0)
    assert lopred.view_count(events) == 1
    with pytest.raises(ValueError):
        lopred.time_spent([("sleep", 0)])


def test_engagement_bounds():
    assert lopred.engagement(0.0, 0.0, 100.0, 2.0) == pytest.approx(0.25)
    assert lopred.engagement(100.0, 2.0, 100.0, 2.0, gamma=0.9) == pytest.approx(0.9)
    assert 0.0 <= lopred.engagement(1e6, 1e6, 10.0, 1.0) <= 1.0


def test_text_pipeline():
    assert lopred.preprocess("The 3 cats ran!") == ["three", "cat", "run"]
    assert lopred.lemmatize("cities") == "city"
    assert lopred.number_to_words(42) == "forty two"
    assert lopred.cosine_similarity([1.0, 0.0], [0.0, 1.0]) == pytest.approx(0.0)


def test_metrics():
    assert lopred.auc([0.9, 0.8, 0.3, 0.2], [1, 1, 0, 0]) == pytest.approx(1.0)
    assert lopred.accuracy([0.9, 0.2], [1, 0]) == pytest.approx(1.0)
    with pytest.raises(ValueError):
        lopred.auc([0.5, 0.5], [1, 1])


def test_stratified_kfold():
    labels = [i % 2 for i in range(20)]
    folds = lopred.stratified_kfold(labels, k=5, seed=3)
    assert len(folds) == 5
    seen = sorted(i for fold in folds for i in fold)
    assert seen == list(range(20))
    for fold in folds:
        assert sum(labels[i] for i in fold) == 2


def test_synth_to_experiment(tmp_path):
    paths = lopred.generate_synth(
        str(tmp_path), learners=250, segments=10, questions=6, pass_rate=0.85, seed=7
    )
    assert len(paths) == 5
    report = json.loads(
        lopred.run_experiment(
            clickstream=str(tmp_path / "clickstream.csv"),
            course=str(tmp_path / "course.txt"),
            outcomes=str(tmp_path / "outcomes.csv"),
            models=["bnn"],
            epochs=30,
            seed=7,
        )
    )
    assert report["k"] == 5
    assert len(report["table"]) == 1
    row = report["table"][0]
    assert row["model"] == "bnn"
    assert 0.0 <= row["auc_mean"] <= 1.0
    assert math.isfinite(row["cross_entropy_sum_mean"])
