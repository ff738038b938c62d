import numpy as np
import pytest
from scipy import stats

from src.data.synthetic import SyntheticConfig, gen_dataset
from src.entities.model import build_model
from src.pipeline.metrics import (
    TASKS, evaluate, interval_metrics, mean_topk_recall, topk_accuracy, topk_hits
)
from src.utils.errors import ContractError, DimensionError
from tests.conftest import tiny_config


def test_top1_example():
    scores = np.array([[0.1, 0.9, 0.0], [0.8, 0.1, 0.1]])
    assert topk_accuracy(scores, np.array([1, 1]), 1) == 0.5
    assert topk_accuracy(scores, np.array([1, 1]), 2) == 1.0


def test_ties_rank_the_lower_index_first():
    scores = np.array([[1.0, 1.0, 1.0]])
    assert topk_hits(scores, np.array([0]), 1).tolist() == [True]
    assert topk_hits(scores, np.array([2]), 1).tolist() == [False]
    assert topk_hits(scores, np.array([1]), 2).tolist() == [True]


def test_recall_averages_over_present_classes():
    scores = np.array([[0.9, 0.1, 0.0],
                       [0.8, 0.2, 0.0],
                       [0.7, 0.3, 0.0]])
    labels = np.array([0, 0, 1])
    assert topk_accuracy(scores, labels, 1) == pytest.approx(2 / 3)
    assert mean_topk_recall(scores, labels, 1) == pytest.approx(0.5)


def test_recall_equals_accuracy_with_balanced_classes():
    scores = np.array([[0.9, 0.1], [0.2, 0.8], [0.6, 0.4], [0.7, 0.3]])
    labels = np.array([0, 1, 1, 0])
    assert mean_topk_recall(scores, labels, 1) == topk_accuracy(scores, labels, 1) == 0.75


def test_k_equal_to_class_count_always_hits(rng):
    scores = rng.standard_normal((20, 4))
    labels = rng.integers(0, 4, 20)
    assert topk_accuracy(scores, labels, 4) == 1.0
    assert mean_topk_recall(scores, labels, 4) == 1.0


def test_hits_match_brute_force(rng):
    for _ in range(100):
        samples = int(rng.integers(1, 12))
        classes = int(rng.integers(1, 9))
        k = int(rng.integers(1, classes + 1))
        scores = rng.integers(0, 4, (samples, classes)).astype(float)
        labels = rng.integers(0, classes, samples)
        expected = []
        for row, label in zip(scores, labels):
            ranked = sorted(range(classes), key=lambda c: (-row[c], c))
            expected.append(label in ranked[:k])
        assert topk_hits(scores, labels, k).tolist() == expected
        recalls = [np.mean([e for e, l in zip(expected, labels) if l == c]) for c in np.unique(labels)]
        assert mean_topk_recall(scores, labels, k) == pytest.approx(np.mean(recalls))


def test_argument_checks():
    with pytest.raises(DimensionError):
        topk_hits(np.zeros((3, 2)), np.zeros(2, dtype=int), 1)
    with pytest.raises(ContractError):
        topk_hits(np.zeros((3, 2)), np.zeros(3, dtype=int), 3)
    with pytest.raises(ContractError):
        mean_topk_recall(np.zeros((0, 2)), np.zeros(0, dtype=int), 1)


def test_interval_metrics_names():
    scores = {task: np.eye(3) for task in TASKS}
    labels = {task: np.arange(3) for task in TASKS}
    values = interval_metrics(scores, labels, {task: 3 for task in TASKS})
    assert sorted(values) == sorted(f"{t}_{m}" for t in TASKS for m in ("top1", "top5", "recall5"))
    assert all(v == 1.0 for v in values.values())


def _eval_setup(strategy="implicit"):
    config = tiny_config(strategy)
    segments = gen_dataset(SyntheticConfig.from_run_config(config), 10)
    return config, build_model(config), segments


def test_evaluate_reports_every_interval():
    config, model, segments = _eval_setup()
    report = evaluate(model, segments, config.anticipation, batch_size=4)
    assert len(report.intervals) == 8
    assert report.sample_count == 10
    assert [e.interval_s for e in report.intervals] == list(config.anticipation.intervals_s)
    assert report.k == {"verb": 3, "noun": 2, "action": 5}
    for entry in report.intervals:
        assert set(entry.values) == set(report.metric_names)
        assert all(0.0 <= v <= 1.0 for v in entry.values.values())
    assert report.value(1.0, "noun_top5") == 1.0
    with pytest.raises(KeyError):
        report.value(3.0, "noun_top1")


def test_evaluate_ignores_the_worker_count():
    config, model, segments = _eval_setup("tb")
    serial = evaluate(model, segments, config.anticipation, batch_size=2, workers=1)
    threaded = evaluate(model, segments, config.anticipation, batch_size=2, workers=4)
    for a, b in zip(serial.intervals, threaded.intervals):
        assert a.values == b.values


def test_evaluate_needs_usable_segments():
    config, model, segments = _eval_setup()
    for segment in segments:
        segment.t_start_s = 1.0
    with pytest.raises(ContractError):
        evaluate(model, segments, config.anticipation)


def test_untrained_model_predicts_actions_at_chance():
    count, chance = 200, 1.0 / 25
    standard_error = stats.binom(count, chance).std() / count
    accuracies = []
    for seed in range(5):
        config = tiny_config(**{"data.grid_w": 3, "data.num_verbs": 5, "data.num_nouns": 5,
                                "data.noise": 0.5, "run.seed": seed})
        segments = gen_dataset(SyntheticConfig.from_run_config(config), count)
        report = evaluate(build_model(config), segments, config.anticipation)
        assert report.k["action"] == 5
        accuracies.append(report.value(1.0, "action_top1"))
    assert abs(np.mean(accuracies) - chance) < 3 * standard_error
