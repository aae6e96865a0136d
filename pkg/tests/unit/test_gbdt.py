"""
Unit tests for the boosted tree trainer, predictor and artifact.
"""

import json
import math

import numpy as np
import pytest
from sklearn.metrics import roc_auc_score

from cgate.exceptions import ArtifactError, ArtifactVersionError, DegenerateLabelsError, DimensionError
from cgate.gbdt import (
    BinMapper,
    Ensemble,
    TrainConfig,
    feature_importance,
    load,
    parse,
    predict_many,
    predict_proba,
    save,
    train,
)


def naive_predict(model, x):
    """Reference walk over the node arrays, one tree at a time."""
    margin = model.base_score
    for tree in model.trees:
        node = 0
        while tree.feature[node] != -1:
            value = x[tree.feature[node]]
            if math.isnan(value):
                go_left = tree.missing_left[node]
            else:
                go_left = value < tree.threshold[node]
            node = tree.left[node] if go_left else tree.right[node]
        margin += tree.value[node]
    return 1.0 / (1.0 + math.exp(-margin))


def xor_clusters(rng):
    sizes = {(0, 0, 0): 400, (1, 1, 0): 100, (0, 1, 1): 300, (1, 0, 1): 200}
    X, y = [], []
    for (a, b, label), n in sizes.items():
        X.append(np.column_stack([a * 0.7 + rng.uniform(0, 0.3, n), b * 0.7 + rng.uniform(0, 0.3, n)]))
        y.extend([label] * n)
    return np.vstack(X), np.array(y)


class TestPrediction:
    def test_empty_ensemble(self):
        assert predict_proba(Ensemble(base_score=0.0), [1.0, 2.0]) == 0.5

    def test_base_score_only(self):
        model = Ensemble(base_score=math.log(1 / 15))
        assert predict_proba(model, []) == pytest.approx(0.0625, abs=1e-12)

    def test_width_checked(self):
        model = Ensemble(base_score=0.0, feature_names=["a", "b", "c"])
        with pytest.raises(DimensionError):
            predict_proba(model, [1.0, 2.0])
        with pytest.raises(DimensionError):
            predict_many(model, np.zeros((4, 2)))

    def test_batch_matches_single_and_naive(self):
        rng = np.random.default_rng(3)
        X = rng.normal(size=(600, 4))
        X[rng.random(X.shape) < 0.1] = np.nan
        y = (np.nan_to_num(X[:, 0]) + rng.normal(0, 0.5, 600) > 0).astype(int)
        model = train(X, y, config=TrainConfig(trees=10, max_depth=3))
        batch = predict_many(model, X)
        for i in range(0, 600, 37):
            assert batch[i] == predict_proba(model, X[i])
            assert batch[i] == pytest.approx(naive_predict(model, X[i].tolist()), abs=1e-12)


class TestTraining:
    def test_separating_feature(self):
        x = np.array([[0.0]] * 100 + [[1.0]] * 100)
        y = np.array([0] * 100 + [1] * 100)
        model = train(x, y, config=TrainConfig(trees=1, max_depth=1, learning_rate=1.0))
        predictions = predict_many(model, x)
        assert ((predictions > 0.5) == (y == 1)).all()

    def test_xor(self):
        X, y = xor_clusters(np.random.default_rng(0))
        model = train(X, y, config=TrainConfig(trees=50, max_depth=2))
        assert roc_auc_score(y, predict_many(model, X)) >= 0.99

    def test_positive_class_weight(self):
        x = np.zeros((160, 1))
        y = np.array(([1] + [0] * 15) * 10)
        model = train(x, y, config=TrainConfig(trees=5, positive_class_weight=15.0))
        assert predict_many(model, x).mean() == pytest.approx(0.5, abs=0.05)

    def test_base_score_is_log_odds(self):
        x = np.arange(20.0).reshape(-1, 1)
        y = np.array([1] * 5 + [0] * 15)
        model = train(x, y, config=TrainConfig(trees=1))
        assert model.base_score == pytest.approx(math.log(5 / 15))

    def test_missing_values_route(self):
        x = np.array([[0.0]] * 50 + [[1.0]] * 50 + [[np.nan]] * 50)
        y = np.array([0] * 100 + [1] * 50)
        model = train(x, y, config=TrainConfig(trees=20, max_depth=2, learning_rate=0.5))
        assert predict_proba(model, [np.nan]) > 0.9
        assert predict_proba(model, [1.0]) < 0.1

    def test_loss_never_increases(self):
        rng = np.random.default_rng(1)
        X = rng.normal(size=(500, 3))
        y = (X[:, 0] + rng.normal(0, 1.0, 500) > 0).astype(int)
        history = train(X, y, config=TrainConfig(trees=25, max_depth=3)).history
        assert len(history) == 26
        assert all(b <= a + 1e-12 for a, b in zip(history, history[1:], strict=False))

    def test_deterministic(self):
        X, y = xor_clusters(np.random.default_rng(2))
        config = TrainConfig(trees=5, max_depth=2)
        assert train(X, y, config=config).model_dump() == train(X, y, config=config).model_dump()

    @pytest.mark.parametrize("labels", [[0] * 10, [1] * 10])
    def test_degenerate_labels(self, labels):
        with pytest.raises(DegenerateLabelsError):
            train(np.zeros((10, 1)), labels)

    def test_labels_must_be_binary(self):
        with pytest.raises(ValueError):
            train(np.zeros((3, 1)), [0, 1, 2])

    def test_importance_ranks_signal(self):
        rng = np.random.default_rng(5)
        X = rng.normal(size=(4000, 3))
        margin = 2.0 * X[:, 0] + 1.0 * X[:, 1]
        y = (rng.random(4000) < 1.0 / (1.0 + np.exp(-margin))).astype(int)
        model = train(
            X,
            y,
            config=TrainConfig(trees=30, max_depth=3, min_child_weight=20.0),
            feature_names=["strong", "weak", "noise"],
        )
        importance = feature_importance(model)
        assert importance["strong"] > importance["weak"] > importance["noise"]

    def test_affine_rescaling_leaves_predictions_unchanged(self):
        rng = np.random.default_rng(8)
        # at most 150 distinct values per column, so each value gets its own bin
        X = rng.integers(0, 150, size=(800, 3)) / 7.0
        X[rng.random(X.shape) < 0.05] = np.nan
        y = (np.nan_to_num(X[:, 0] - X[:, 1], nan=0.0) + rng.normal(0, 3.0, 800) > 0).astype(int)
        scale, shift = np.array([3.5, 0.02, 1.0]), np.array([-40.0, 7.0, 1e3])
        config = TrainConfig(trees=12, max_depth=3)
        original = train(X, y, config=config)
        rescaled = train(X * scale + shift, y, config=config)
        assert [t.feature for t in rescaled.trees] == [t.feature for t in original.trees]
        held_out = rng.integers(0, 150, size=(200, 3)) / 7.0
        for data in (X, held_out):
            np.testing.assert_allclose(
                predict_many(rescaled, data * scale + shift), predict_many(original, data), rtol=1e-12
            )


class TestBinning:
    def test_bin_le_b_iff_below_edge(self):
        X = np.array([[1.0], [2.0], [3.0], [np.nan]])
        mapper = BinMapper.fit(X)
        codes = mapper.transform(X)[:, 0]
        assert codes.tolist() == [0, 1, 2, mapper.missing_bin]
        assert mapper.threshold(0, 0) == 1.5

    def test_many_values_capped(self):
        X = np.arange(1000.0).reshape(-1, 1)
        mapper = BinMapper.fit(X, max_bins=16)
        assert mapper.value_bins[0] <= 16


class TestArtifact:
    @pytest.fixture
    def model(self):
        X, y = xor_clusters(np.random.default_rng(4))
        return train(X, y, config=TrainConfig(trees=5, max_depth=2))

    def test_save_and_load(self, model, tmp_path):
        path = save(model, tmp_path / "m.json")
        loaded = load(path)
        X, _ = xor_clusters(np.random.default_rng(9))
        np.testing.assert_array_equal(predict_many(loaded, X), predict_many(model, X))

    def test_unknown_version(self, model):
        document = json.loads(model.model_dump_json())
        document["format_version"] = "cgate-gbdt/999"
        with pytest.raises(ArtifactVersionError):
            parse(document)

    def test_leaf_values_are_read_back(self, model):
        document = json.loads(model.model_dump_json())
        tree = document["trees"][0]
        leaf = tree["feature"].index(-1)
        tree["value"][leaf] += 1.0
        changed = parse(document)
        X, _ = xor_clusters(np.random.default_rng(9))
        assert not np.array_equal(predict_many(changed, X), predict_many(model, X))

    def test_malformed(self, model, tmp_path):
        document = json.loads(model.model_dump_json())
        document["trees"][0]["left"] = document["trees"][0]["left"][:-1]
        with pytest.raises(ArtifactError):
            parse(document)
        (tmp_path / "bad.json").write_text("{not json")
        with pytest.raises(ArtifactError):
            load(tmp_path / "bad.json")

    @pytest.mark.parametrize("pointer", ["self", "back"])
    def test_cyclic_children_rejected(self, model, pointer):
        document = json.loads(model.model_dump_json())
        tree = next(t for t in document["trees"] if max(t["feature"]) >= 0)
        inner = [i for i, f in enumerate(tree["feature"]) if f >= 0]
        node = inner[-1]
        tree["left"][node] = node if pointer == "self" else 0
        with pytest.raises(ArtifactError, match="before itself"):
            parse(document)
