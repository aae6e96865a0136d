"""
Unit tests for the hybrid context + tabular model.
"""

import json

import numpy as np
import pytest
import torch
from sklearn.metrics import roc_auc_score

from cgate.exceptions import ArtifactError, ArtifactVersionError, DegenerateLabelsError, ModalityError
from cgate.gbdt import sigmoid
from cgate.hybrid import (
    Batch,
    HybridConfig,
    batch_loss,
    build_net,
    load_hybrid,
    parse_hybrid,
    predict_hybrid,
    predict_hybrid_many,
    save_hybrid,
    split_tokens,
    tokenize_context,
    train_hybrid,
)
from cgate.hybrid.model import batch_for

SMALL = HybridConfig(vocab_buckets=64, embed_dim=4, tabular_hidden=5, head_hidden=6, epochs=0)
LEARNING = HybridConfig(vocab_buckets=256, embed_dim=8, epochs=30, batch_size=64, step_size=0.02)


def keyword_task(n=600, seed=0):
    """Label 1 iff the context mentions ``alpha``; the tabular column is noise."""
    rng = np.random.default_rng(seed)
    labels = (rng.random(n) < 0.4).astype(int)
    contexts = [
        " ".join([("alpha" if y else "beta"), *(f"w{rng.integers(50)}" for _ in range(4))]) for y in labels
    ]
    return contexts, rng.random((n, 2)), labels


def threshold_task(n=600, seed=0):
    """Label 1 iff the first tabular column exceeds 0.5; the context is noise."""
    rng = np.random.default_rng(seed)
    X = rng.random((n, 2))
    contexts = [" ".join(f"w{rng.integers(50)}" for _ in range(5)) for _ in range(n)]
    return contexts, X, (X[:, 0] > 0.5).astype(int)


class TestTokenize:
    def test_empty(self):
        assert tokenize_context("") == []

    def test_repeated_token_same_bucket(self):
        ids = tokenize_context("foo_bar foo")
        assert len(ids) == 3
        assert ids[0] == ids[2]

    def test_split(self):
        assert split_tokens("self.Items[i] += 1") == ["self", "items", "i", "1"]

    def test_buckets_bound(self):
        assert all(0 <= i < 8 for i in tokenize_context("a b c d e f g h i j", vocab_buckets=8))

    def test_vocab_must_be_power_of_two(self):
        with pytest.raises(ValueError):
            HybridConfig(vocab_buckets=100)

    def test_collisions_match_uniform_hashing(self):
        n, buckets = 10_000, 2**15
        ids = [tokenize_context(f"ident{i}", buckets)[0] for i in range(n)]
        colliding = n - len(set(ids))
        # tokens minus occupied buckets, for n uniform draws over the buckets
        expected = n - buckets * (1.0 - (1.0 - 1.0 / buckets) ** n)
        assert colliding == pytest.approx(expected, rel=0.2)


class TestModel:
    @pytest.fixture
    def untrained(self):
        contexts, X, y = keyword_task(n=40)
        return train_hybrid(contexts, X, y, SMALL)

    @pytest.fixture(scope="class")
    def context_model(self):
        contexts, X, y = keyword_task()
        return train_hybrid(contexts, X, y, LEARNING)

    def test_zero_epochs_predicts_prior(self, untrained):
        expected = sigmoid(float(untrained.net.head[-1].bias[0]))
        assert predict_hybrid(untrained, "anything at all", [0.3, 0.7]) == pytest.approx(expected)
        assert predict_hybrid(untrained, None, [0.9, 0.1]) == pytest.approx(expected)

    def test_saturated_logits_stay_inside_the_unit_interval(self, untrained):
        with torch.no_grad():
            untrained.net.head[-1].bias.fill_(100.0)
        assert 0.0 < predict_hybrid(untrained, "x", [0.5, 0.5]) < 1.0
        with torch.no_grad():
            untrained.net.head[-1].bias.fill_(-100.0)
        assert 0.0 < predict_hybrid(untrained, "x", [0.5, 0.5]) < 1.0

    def test_duplicate_tokens_do_not_change_the_mean(self):
        contexts, X, y = keyword_task(n=200)
        model = train_hybrid(contexts, X, y, SMALL.model_copy(update={"epochs": 2}))
        assert predict_hybrid(model, "foo foo", [0.5, 0.5]) == predict_hybrid(model, "foo", [0.5, 0.5])

    def test_token_order_does_not_matter(self, context_model):
        rng = np.random.default_rng(5)
        for context in keyword_task(n=20, seed=3)[0]:
            tokens = context.split()
            shuffled = " ".join(rng.permutation(tokens))
            assert predict_hybrid(context_model, shuffled, [0.4, 0.6]) == pytest.approx(
                predict_hybrid(context_model, context, [0.4, 0.6]), rel=1e-12
            )

    def test_empty_and_missing_context_agree(self):
        contexts, X, y = keyword_task(n=200)
        model = train_hybrid(contexts, X, y, SMALL.model_copy(update={"epochs": 2}))
        assert predict_hybrid(model, "", [0.2, 0.4]) == predict_hybrid(model, None, [0.2, 0.4])

    def test_batch_matches_single(self):
        contexts, X, y = keyword_task(n=200)
        model = train_hybrid(contexts, X, y, SMALL.model_copy(update={"epochs": 1}))
        batch = predict_hybrid_many(model, contexts[:10], X[:10])
        single = [predict_hybrid(model, c, x) for c, x in zip(contexts[:10], X[:10], strict=True)]
        np.testing.assert_allclose(batch, single, rtol=1e-9)

    def test_learns_context_signal(self, context_model):
        test_contexts, test_X, test_y = keyword_task(seed=1)
        assert roc_auc_score(test_y, predict_hybrid_many(context_model, test_contexts, test_X)) > 0.95
        assert context_model.history[-1].train_loss < context_model.history[0].train_loss
        assert context_model.history[-1].validation_auc is not None

    def test_deterministic(self):
        contexts, X, y = keyword_task(n=200)
        config = SMALL.model_copy(update={"epochs": 2})
        first = train_hybrid(contexts, X, y, config).net.state_dict()
        second = train_hybrid(contexts, X, y, config).net.state_dict()
        for name in first:
            assert torch.equal(first[name], second[name]), name

    def test_missing_context_rejected(self):
        contexts, X, y = keyword_task(n=20)
        contexts[3] = None
        with pytest.raises(ModalityError):
            train_hybrid(contexts, X, y, SMALL)

    def test_nan_rejected(self):
        contexts, X, y = keyword_task(n=20)
        X[0, 0] = np.nan
        with pytest.raises(ValueError):
            train_hybrid(contexts, X, y, SMALL)

    def test_degenerate_labels(self):
        contexts, X, _ = keyword_task(n=20)
        with pytest.raises(DegenerateLabelsError):
            train_hybrid(contexts, X, np.zeros(20, dtype=int), SMALL)


class TestConcatenationSeam:
    """Each half of the head input carries the signal planted in its modality."""

    @staticmethod
    def auc_with_half_zeroed(model, task, zeroed):
        contexts, X, y = task
        net = model.net
        with torch.no_grad():
            joined = net.head_input(batch_for(model, contexts, X))
            split = model.config.embed_dim
            if zeroed == "context":
                joined[:, :split] = 0.0
            elif zeroed == "tabular":
                joined[:, split:] = 0.0
            scores = net.head(joined).squeeze(1).numpy()
        return roc_auc_score(y, scores)

    def test_head_input_width(self):
        contexts, X, y = keyword_task(n=40)
        model = train_hybrid(contexts, X, y, SMALL)
        assert model.head_input_dim == SMALL.embed_dim + SMALL.tabular_hidden

    def test_context_half(self):
        model = train_hybrid(*keyword_task(), LEARNING)
        held_out = keyword_task(seed=1)
        assert self.auc_with_half_zeroed(model, held_out, None) > 0.9
        assert self.auc_with_half_zeroed(model, held_out, "context") < 0.7

    def test_tabular_half(self):
        model = train_hybrid(*threshold_task(), LEARNING)
        held_out = threshold_task(seed=1)
        assert self.auc_with_half_zeroed(model, held_out, None) > 0.9
        assert self.auc_with_half_zeroed(model, held_out, "tabular") < 0.7


class TestGradients:
    def test_autograd_matches_finite_differences(self):
        rng = np.random.default_rng(0)
        net = build_net(SMALL, 3, 0.3)
        with torch.no_grad():
            net.head[-1].weight.copy_(torch.from_numpy(rng.normal(0.0, 0.5, size=(1, SMALL.head_hidden))))
        batch = Batch.build([[1, 2, 2], [], [5, 7, 1, 9], [3]], rng.random((4, 3)))
        labels = np.array([1, 0, 0, 1])
        net.zero_grad()
        batch_loss(net, batch, labels).backward()

        eps = 1e-6
        for name, param in net.named_parameters():
            flat, grad = param.data.view(-1), param.grad.view(-1)
            # rows of the embedding the batch touches, so the check is not all zeros
            candidates = (
                np.concatenate([np.arange(r * SMALL.embed_dim, (r + 1) * SMALL.embed_dim) for r in (1, 2, 9)])
                if name == "embedding.weight"
                else np.arange(flat.numel())
            )
            for index in rng.choice(candidates, size=min(candidates.size, 5), replace=False):
                saved = flat[index].item()
                with torch.no_grad():
                    flat[index] = saved + eps
                    up = batch_loss(net, batch, labels).item()
                    flat[index] = saved - eps
                    down = batch_loss(net, batch, labels).item()
                    flat[index] = saved
                numeric = (up - down) / (2 * eps)
                assert grad[index].item() == pytest.approx(numeric, rel=1e-4, abs=1e-8), name


class TestArtifact:
    @pytest.fixture
    def model(self):
        contexts, X, y = keyword_task(n=200)
        return train_hybrid(contexts, X, y, SMALL.model_copy(update={"epochs": 1}))

    def test_round_trip(self, model, tmp_path):
        loaded = load_hybrid(save_hybrid(model, tmp_path / "h.json"))
        contexts, X, _ = keyword_task(n=30, seed=4)
        np.testing.assert_array_equal(
            predict_hybrid_many(loaded, contexts, X), predict_hybrid_many(model, contexts, X)
        )
        assert len(loaded.history) == 1

    def test_blobs_are_state_dict_tensors(self, model, tmp_path):
        document = json.loads(save_hybrid(model, tmp_path / "h.json").read_text())
        assert set(document["params"]) == set(model.net.state_dict())
        assert document["params"]["embedding.weight"]["shape"] == [SMALL.vocab_buckets, SMALL.embed_dim]

    def test_unknown_version(self, model, tmp_path):
        document = json.loads(save_hybrid(model, tmp_path / "h.json").read_text())
        document["format_version"] = "cgate-hybrid/9"
        with pytest.raises(ArtifactVersionError):
            parse_hybrid(document)

    def test_shape_mismatch(self, model, tmp_path):
        document = json.loads(save_hybrid(model, tmp_path / "h.json").read_text())
        document["config"]["embed_dim"] = 5
        with pytest.raises(ArtifactError):
            parse_hybrid(document)

    def test_missing_tensor(self, model, tmp_path):
        document = json.loads(save_hybrid(model, tmp_path / "h.json").read_text())
        del document["params"]["head.2.bias"]
        with pytest.raises(ArtifactError, match="lacks"):
            parse_hybrid(document)
