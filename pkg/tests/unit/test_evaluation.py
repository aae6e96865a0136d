"""
Unit tests for offline replay, trade-off curves, A/B bootstrap and AUC helpers.
"""

import itertools
import json
import math
from xml.etree import ElementTree

import numpy as np
import pytest
from conftest import make_dataset

from cgate.calibrate import HardRules, ThresholdPolicy, sweep_joint
from cgate.events import Outcome
from cgate.evaluation import (
    TradeoffCurve,
    ab_compare,
    bayes_auc,
    bootstrap_delta,
    curve_scored,
    export_curve,
    load_curve,
    plot_curve,
    raw_metrics,
    replay,
    replay_scored,
    roc_auc,
    save_ab_report,
    user_totals,
)
from cgate.evaluation.curve import TSV_COLUMNS, sidecar_path
from cgate.exceptions import CalibrationError, DatasetIOError, DegenerateLabelsError, ProvenanceError
from cgate.scoring import ScoredDataset, score_dataset

SVG = "{http://www.w3.org/2000/svg}"


def five_events():
    """Two accepts (10 and 20 symbols), one cancel and two ignores; only the cancel scores low."""
    outcomes = [
        Outcome.ACCEPTED,
        Outcome.ACCEPTED,
        Outcome.EXPLICIT_CANCEL,
        Outcome.IGNORED,
        Outcome.IGNORED,
    ]
    return ScoredDataset.from_arrays(
        trigger_scores=[1.0] * 5,
        filter_scores=[0.9, 0.9, 0.1, 0.9, 0.9],
        outcomes=outcomes,
        completion_length=[10, 20, 15, 12, 8],
    )


def curve_fixture():
    rng = np.random.default_rng(0)
    n = 1000
    quality = rng.normal(size=n)
    accepted = rng.random(n) < 1.0 / (1.0 + np.exp(-(quality - 1.0)))
    outcomes = [
        Outcome.ACCEPTED if a else (Outcome.EXPLICIT_CANCEL if r < 0.3 else Outcome.IGNORED)
        for a, r in zip(accepted, rng.random(n), strict=True)
    ]
    return ScoredDataset.from_arrays(
        trigger_scores=1.0 / (1.0 + np.exp(-(quality + rng.normal(0, 1, n)))),
        filter_scores=1.0 / (1.0 + np.exp(-(quality + rng.normal(0, 0.5, n)))),
        outcomes=outcomes,
        completion_length=rng.integers(1, 80, n),
    )


class TestReplay:
    def test_blocking_only_the_cancel(self):
        report = replay_scored(five_events(), ThresholdPolicy(filter_threshold=0.5))
        assert report.shown == 4
        assert report.accept_rate == 0.5
        assert report.cancel_rate == 0.0
        assert report.symbols_completed == 30
        assert report.generations == 5
        assert report.generations_filtered_pct == 0.0

    def test_filter_on_negatives_raises_accept_rate(self):
        outcomes = [Outcome.ACCEPTED] * 31 + [Outcome.IGNORED] * 69
        filter_scores = [0.9] * 31 + [0.9] * 50 + [0.1] * 19
        scored = ScoredDataset.from_arrays([1.0] * 100, filter_scores, outcomes)
        assert replay_scored(scored, ThresholdPolicy.pass_all()).accept_rate == 0.31
        assert replay_scored(scored, ThresholdPolicy(filter_threshold=0.5)).accept_rate > 0.31

    def test_trigger_block_counts_as_filtered(self):
        scored = ScoredDataset.from_arrays([0.1, 0.9, 0.9, 0.9], [1.0] * 4, [Outcome.ACCEPTED] * 4, [5] * 4)
        report = replay_scored(scored, ThresholdPolicy(trigger_threshold=0.5))
        assert report.generations == 3
        assert report.generations_filtered_pct == 25.0
        assert report.symbols_completed == 15

    def test_nothing_shown_has_no_rates(self):
        scored = ScoredDataset.from_arrays([1.0], [1.0], [Outcome.NOT_SHOWN])
        report = replay_scored(scored, ThresholdPolicy.pass_all())
        assert report.accept_rate is None
        assert report.cancel_rate is None

    def test_pass_all_equals_raw(self, small_dataset):
        assert replay(small_dataset, ThresholdPolicy.pass_all()) == raw_metrics(small_dataset)

    def test_models_are_used(self, small_split, trigger_model, filter_model):
        _, test = small_split
        raw = raw_metrics(test)
        scored = score_dataset(test, trigger_model, filter_model)
        policy = ThresholdPolicy(
            trigger_threshold=float(np.median(scored.trigger_scores)),
            filter_threshold=float(np.median(scored.filter_scores)),
        )
        report = replay(test, policy, trigger_model, filter_model)
        assert report == replay_scored(scored, policy)
        assert report.generations < raw.generations
        assert report.shown < raw.shown

    def test_refuses_active_collection(self):
        dataset = make_dataset([Outcome.ACCEPTED, Outcome.IGNORED])
        active = type(dataset)(
            events=dataset.events,
            generations=dataset.generations,
            manifest=dataset.manifest.model_copy(update={"collection_policy": "active"}),
        )
        with pytest.raises(ProvenanceError):
            replay(active, ThresholdPolicy.pass_all())

    @staticmethod
    def random_fixture(rng, n=20):
        kinds = list(Outcome)
        outcomes = [kinds[k] for k in rng.integers(0, len(kinds), n)]
        lengths = rng.integers(1, 60, n)
        scored = ScoredDataset.from_arrays(
            trigger_scores=rng.choice([0.1, 0.3, 0.5, 0.7, 0.9], size=n),
            filter_scores=rng.random(n),
            outcomes=outcomes,
            completion_length=lengths,
            compilable=rng.random(n) < 0.8,
        )
        policy = ThresholdPolicy(
            trigger_threshold=float(rng.choice([0.0, 0.3, 0.5, 0.9])),
            filter_threshold=float(rng.random()),
            hard_rules=HardRules(block_non_compilable=bool(rng.random() < 0.5)),
        )
        return scored, policy

    @staticmethod
    def walk_events(scored, policy):
        """Replay one event at a time through the policy's own decisions."""
        generations = shown = accepted = cancels = symbols = 0
        for i in range(len(scored)):
            if not policy.trigger_passes(scored.trigger_scores[i]):
                continue
            generations += 1
            if not scored.shown[i]:
                continue
            passed, _ = policy.filter_decision(scored.filter_scores[i], bool(scored.compilable[i]))
            if not passed:
                continue
            shown += 1
            if scored.accepted[i]:
                accepted += 1
                symbols += int(scored.completion_length[i])
            cancels += int(scored.cancelled[i])
        return generations, shown, accepted, cancels, symbols

    def test_matches_event_by_event_walk(self):
        rng = np.random.default_rng(17)
        for _ in range(100):
            scored, policy = self.random_fixture(rng)
            report = replay_scored(scored, policy)
            generations, shown, accepted, cancels, symbols = self.walk_events(scored, policy)
            assert (report.generations, report.shown, report.accepted) == (generations, shown, accepted)
            assert (report.explicit_cancels, report.symbols_completed) == (cancels, symbols)
            assert report.generations_filtered_pct == pytest.approx(100.0 * (len(scored) - generations) / len(scored))
            if shown:
                assert report.accept_rate == pytest.approx(accepted / shown)
                assert report.cancel_rate == pytest.approx(cancels / shown)
            else:
                assert report.accept_rate is None

    def test_monotone_in_filter_threshold(self):
        scored = curve_fixture()
        reports = [replay_scored(scored, ThresholdPolicy(filter_threshold=t)) for t in np.linspace(0.0, 1.0, 21)]
        for looser, stricter in itertools.pairwise(reports):
            assert stricter.shown <= looser.shown
            assert stricter.accepted <= looser.accepted
            assert stricter.symbols_completed <= looser.symbols_completed
            assert stricter.generations == looser.generations


class TestCurve:
    def test_points_follow_the_sweep(self):
        scored = curve_fixture()
        sweep = sweep_joint(scored, 0.10)
        result = curve_scored(scored, sweep)
        assert [p.grid_pct for p in result.points] == [p.grid_pct for p in sweep]
        assert result.target_fnr == 0.10
        for point, swept in zip(result.points, sweep, strict=True):
            assert point.feasible == swept.feasible
            if point.feasible:
                assert point.report == replay_scored(scored, swept.policy)

    def test_no_feasible_point(self):
        scored = ScoredDataset.from_arrays(np.linspace(0, 1, 10), [0.5] * 10, [Outcome.ACCEPTED] * 10)
        with pytest.raises(CalibrationError):
            curve_scored(scored, sweep_joint(scored, 0.0, [50]))

    def test_tsv_round_trip(self, tmp_path):
        scored = curve_fixture()
        original = curve_scored(scored, sweep_joint(scored, 0.05))
        path = export_curve(original, tmp_path / "curve.tsv")
        header = path.read_text().splitlines()[0]
        assert header == "grid_pct\tsymbols_completed\taccept_rate\tcancel_rate\trealized_fnr\tfeasible"
        assert load_curve(path) == original

    def test_tsv_alone_keeps_the_six_columns(self, tmp_path):
        scored = curve_fixture()
        original = curve_scored(scored, sweep_joint(scored, 0.05))
        path = export_curve(original, tmp_path / "curve.tsv")
        sidecar_path(path).unlink()
        loaded = load_curve(path)
        assert [p.grid_pct for p in loaded.points] == [p.grid_pct for p in original.points]
        for got, want in zip(loaded.points, original.points, strict=True):
            assert (got.feasible, got.realized_fnr) == (want.feasible, want.realized_fnr)
            if want.feasible:
                assert got.report.symbols_completed == want.report.symbols_completed
                assert got.report.accept_rate == want.report.accept_rate
                assert got.report.cancel_rate == want.report.cancel_rate

    def test_empty_curve_is_header_only(self, tmp_path):
        path = export_curve(TradeoffCurve(), tmp_path / "empty.tsv")
        assert path.read_text().splitlines() == ["\t".join(TSV_COLUMNS)]
        assert load_curve(path) == TradeoffCurve()

    def test_infeasible_rows_have_empty_cells(self, tmp_path):
        n = 100
        outcomes = [Outcome.ACCEPTED if i < 10 else Outcome.IGNORED for i in range(n)]
        scored = ScoredDataset.from_arrays(np.linspace(0.0, 1.0, n), [0.5] * n, outcomes, [4] * n)
        path = export_curve(curve_scored(scored, sweep_joint(scored, 0.1, [0, 20])), tmp_path / "c.tsv")
        infeasible = path.read_text().splitlines()[2].split("\t")
        assert infeasible[0] == "20.0"
        assert infeasible[1:5] == ["", "", "", ""]
        assert infeasible[5] == "false"

    def test_load_errors(self, tmp_path):
        (tmp_path / "empty.tsv").write_text("")
        with pytest.raises(DatasetIOError):
            load_curve(tmp_path / "empty.tsv")
        (tmp_path / "bad.tsv").write_text(
            "grid_pct\tsymbols_completed\taccept_rate\tcancel_rate\trealized_fnr\tfeasible\nx\t1\t\t\t\ttrue\n"
        )
        with pytest.raises(DatasetIOError):
            load_curve(tmp_path / "bad.tsv")

    def test_plot_has_one_polyline_per_metric(self, tmp_path):
        scored = curve_fixture()
        path = plot_curve(curve_scored(scored, sweep_joint(scored, 0.10)), tmp_path / "curve.svg")
        assert path.read_text().lstrip().startswith("<?xml")
        root = ElementTree.parse(path).getroot()
        polylines = list(root.iter(f"{SVG}polyline"))
        assert len(polylines) == 3
        groups = {g.get("id"): g for g in root.iter(f"{SVG}g")}
        for metric in ("symbols_completed", "accept_rate", "cancel_rate"):
            (line,) = groups[metric].findall(f"{SVG}polyline")
            assert len(line.get("points").split()) >= 2


class TestBootstrap:
    def test_identical_arms(self):
        rng = np.random.default_rng(0)
        shown = rng.integers(5, 40, 60).astype(float)
        accepted = rng.binomial(shown.astype(int), 0.3).astype(float)
        result = bootstrap_delta("accept_rate", (accepted, shown), (accepted, shown), resamples=500)
        assert result.point_delta_pct == 0.0
        assert result.ci_low_pct <= 0.0 <= result.ci_high_pct
        assert not result.significant

    def test_planted_shift(self):
        rng = np.random.default_rng(1)
        shown_a = np.full(150, 20.0)
        shown_b = np.full(127, 20.0)
        arm_a = (rng.binomial(20, 0.30, 150).astype(float), shown_a)
        arm_b = (rng.binomial(20, 0.42, 127).astype(float), shown_b)
        result = bootstrap_delta("accept_rate", arm_a, arm_b, resamples=2000, rng=rng)
        assert result.significant
        assert result.ci_low_pct > 0.0
        assert 20.0 < result.point_delta_pct < 60.0

    @pytest.mark.slow
    def test_planted_shift_power(self):
        """A +40% accept-rate shift across heterogeneous users is found in nearly every run."""
        rng = np.random.default_rng(7)
        runs = 100
        detected = 0
        for _ in range(runs):
            arms = []
            for users, lift in ((151, 1.0), (127, 1.4)):
                shown = rng.integers(5, 40, users).astype(float)
                rates = np.clip(rng.beta(3.0, 7.0, users) * lift, 0.0, 1.0)
                arms.append((rng.binomial(shown.astype(int), rates).astype(float), shown))
            result = bootstrap_delta("accept_rate", *arms, resamples=1000, rng=rng)
            detected += result.significant and result.point_delta_pct > 0.0
        assert detected / runs >= 0.95

    def test_zero_denominator_users_left_out(self):
        arm_a = (np.array([1.0, 0.0, 2.0]), np.array([4.0, 0.0, 4.0]))
        arm_b = (np.array([2.0, 2.0]), np.array([4.0, 4.0]))
        result = bootstrap_delta("accept_rate", arm_a, arm_b, resamples=100)
        assert result.users_a == 2
        assert result.arm_a_value == pytest.approx(0.375)

    def test_undefined_metric_is_skipped(self):
        zeros = (np.zeros(3), np.zeros(3))
        assert bootstrap_delta("accept_rate", zeros, (np.ones(3), np.ones(3))) is None

    def test_pooled(self):
        arm_a = (np.array([1.0, 9.0]), np.array([10.0, 10.0]))
        arm_b = (np.array([2.0, 8.0]), np.array([10.0, 10.0]))
        result = bootstrap_delta("accept_rate", arm_a, arm_b, resamples=100, pooled=True)
        assert result.arm_a_value == pytest.approx(0.5)
        assert result.point_delta_pct == pytest.approx(0.0)

    @pytest.mark.slow
    def test_false_positive_rate_under_the_null(self):
        rng = np.random.default_rng(2024)
        significant = 0
        runs = 200
        for _ in range(runs):
            shown_a = rng.integers(10, 50, 100).astype(float)
            shown_b = rng.integers(10, 50, 100).astype(float)
            arm_a = (rng.binomial(shown_a.astype(int), 0.3).astype(float), shown_a)
            arm_b = (rng.binomial(shown_b.astype(int), 0.3).astype(float), shown_b)
            significant += bootstrap_delta("accept_rate", arm_a, arm_b, resamples=2000, rng=rng).significant
        assert 0.02 <= significant / runs <= 0.09


class TestAbCompare:
    def arms(self):
        users = tuple(f"u{i}" for i in range(4))
        arm_a = make_dataset([Outcome.ACCEPTED, Outcome.IGNORED, Outcome.IGNORED, Outcome.EXPLICIT_CANCEL] * 4, users)
        arm_b = make_dataset([Outcome.ACCEPTED, Outcome.ACCEPTED, Outcome.IGNORED, Outcome.EXPLICIT_CANCEL] * 4, users)
        return arm_a, arm_b

    def test_user_totals(self):
        arm_a, _ = self.arms()
        accepted, shown = user_totals(arm_a)["accept_rate"]
        assert shown.tolist() == [4.0] * 4
        assert accepted.sum() == 4.0

    def test_compare_and_save(self, tmp_path):
        arm_a, arm_b = self.arms()
        results = ab_compare(arm_a, arm_b, resamples=200, seed=3)
        assert [r.metric for r in results] == ["accept_rate", "cancel_rate", "symbols_completed"]
        assert results[0].point_delta_pct == pytest.approx(100.0)
        document = json.loads(save_ab_report(results, tmp_path / "ab.json").read_text())
        assert len(document["results"]) == 3

    def test_unknown_metric(self):
        arm_a, arm_b = self.arms()
        with pytest.raises(ValueError):
            ab_compare(arm_a, arm_b, metrics=["happiness"])

    def test_needs_two_users(self):
        single = make_dataset([Outcome.ACCEPTED, Outcome.IGNORED])
        with pytest.raises(ValueError):
            ab_compare(single, single)


class TestAuc:
    def test_roc_auc(self):
        assert roc_auc([0, 0, 1, 1], [0.1, 0.2, 0.3, 0.4]) == 1.0
        with pytest.raises(DegenerateLabelsError):
            roc_auc([1, 1], [0.2, 0.3])

    def test_bayes_auc_matches_pairwise_definition(self):
        p = np.random.default_rng(0).random(40)
        p[5] = p[6]
        num = den = 0.0
        for i, j in itertools.permutations(range(p.size), 2):
            w = p[i] * (1 - p[j])
            num += w * (1.0 if p[i] > p[j] else 0.5 if p[i] == p[j] else 0.0)
            den += w
        assert bayes_auc(p) == pytest.approx(num / den, abs=1e-12)

    def test_bayes_auc_of_constant_probabilities(self):
        assert bayes_auc([0.3] * 10) == 0.5

    def test_bayes_auc_degenerate(self):
        with pytest.raises(DegenerateLabelsError):
            bayes_auc([1.0, 1.0])

    def test_bayes_auc_tracks_realized_auc(self, small_dataset):
        truth = [small_dataset.ground_truth[g.event_id].accept_probability for g in small_dataset.generations]
        labels = [int(g.outcome is Outcome.ACCEPTED) for g in small_dataset.generations]
        assert abs(roc_auc(labels, truth) - bayes_auc(truth)) < 0.05
        assert not math.isnan(bayes_auc(truth))
