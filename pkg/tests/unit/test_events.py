"""
Unit tests for the events package: labels, stats, validation, splits and dataset files.
"""

import json
import math

import pytest
from conftest import make_dataset, make_event, make_generation

from cgate.events import (
    Dataset,
    FeatureBag,
    Label,
    Outcome,
    dataset_stats,
    imbalance,
    is_positive,
    label_of,
    load_dataset,
    save_dataset,
    split_by_user,
    validate_dataset,
    validate_dataset_dir,
)
from cgate.exceptions import DatasetIOError, SplitError
from cgate.features import default_schema


class TestLabels:
    def test_accepted_is_positive(self):
        assert label_of(make_generation("e1", Outcome.ACCEPTED)) is Label.POSITIVE

    @pytest.mark.parametrize("outcome", [Outcome.EXPLICIT_CANCEL, Outcome.NOT_SHOWN, Outcome.IGNORED])
    def test_everything_else_is_negative(self, outcome):
        record = make_generation("e1", outcome)
        assert label_of(record) is Label.NEGATIVE
        assert not is_positive(record)

    def test_shown(self):
        assert not Outcome.NOT_SHOWN.shown
        assert Outcome.IGNORED.shown


class TestFeatureBag:
    def test_names_must_be_disjoint(self):
        with pytest.raises(ValueError):
            FeatureBag(scalars={"x": 1.0}, flags={"x": True})

    def test_merged_prefers_other(self):
        merged = FeatureBag(scalars={"a": 1.0, "b": 2.0}).merged(FeatureBag(scalars={"b": 3.0}, flags={"a": True}))
        assert merged.scalars == {"b": 3.0}
        assert merged.flags == {"a": True}
        assert merged.names() == {"a", "b"}


class TestStats:
    def test_imbalance(self):
        assert imbalance(15, 1) == 15.0
        assert imbalance(0, 4) == 0.0
        assert math.isinf(imbalance(3, 0))

    def test_trigger_imbalance_counts_unshown(self):
        dataset = make_dataset([Outcome.ACCEPTED] + [Outcome.NOT_SHOWN] * 15)
        assert dataset.manifest.label_imbalance_trigger == 15.0

    def test_filter_imbalance_counts_shown_only(self):
        outcomes = [Outcome.ACCEPTED] * 2 + [Outcome.IGNORED] * 3 + [Outcome.EXPLICIT_CANCEL] * 2
        outcomes += [Outcome.NOT_SHOWN] * 4
        manifest = make_dataset(outcomes).manifest
        assert manifest.label_imbalance_filter == 2.5
        assert manifest.label_imbalance_trigger == 4.5

    def test_all_positive(self):
        manifest = make_dataset([Outcome.ACCEPTED] * 3).manifest
        assert manifest.label_imbalance_trigger == 0.0
        assert manifest.label_imbalance_filter == 0.0

    def test_counts(self):
        manifest = make_dataset([Outcome.IGNORED] * 6, users=("a", "b", "c")).manifest
        assert (manifest.event_count, manifest.generation_count, manifest.user_count) == (6, 6, 3)


class TestValidation:
    def test_consistent_dataset(self):
        dataset = make_dataset([Outcome.ACCEPTED, Outcome.IGNORED, Outcome.NOT_SHOWN])
        report = validate_dataset(dataset.events, dataset.generations, dataset.manifest)
        assert report.ok

    def test_dangling_reference(self):
        events = [make_event("e1"), make_event("e2", timestamp=1)]
        generations = [make_generation("e1"), make_generation("e2"), make_generation("e9")]
        report = validate_dataset(events, generations, dataset_stats(events, generations))
        assert len(report.violations) == 1
        assert report.violations[0].kind == "dangling_reference"
        assert report.violations[0].event_id == "e9"

    def test_imbalance_mismatch_names_both_values(self):
        dataset = make_dataset([Outcome.ACCEPTED] + [Outcome.IGNORED] * 3)
        manifest = dataset.manifest.model_copy(update={"label_imbalance_trigger": 2.0})
        report = validate_dataset(dataset.events, dataset.generations, manifest)
        assert report.kinds() == ["imbalance_mismatch"]
        assert "2.0" in report.violations[0].message
        assert "3.0" in report.violations[0].message

    def test_infinite_imbalance_matches(self):
        dataset = make_dataset([Outcome.IGNORED] * 3)
        report = validate_dataset(dataset.events, dataset.generations, dataset.manifest)
        assert report.ok

    def test_record_level_violations(self):
        events = [
            make_event("e1", timestamp=10),
            make_event("e1", timestamp=5),
        ]
        generations = [
            make_generation("e1", Outcome.IGNORED, completion_length=0),
            make_generation("e1"),
        ]
        report = validate_dataset(events, generations, dataset_stats(events, generations))
        assert {"duplicate_event_id", "timestamp_order", "empty_generation_shown", "duplicate_generation"} <= set(
            report.kinds()
        )

    def test_count_mismatch(self):
        dataset = make_dataset([Outcome.IGNORED] * 2)
        manifest = dataset.manifest.model_copy(update={"event_count": 5})
        assert validate_dataset(dataset.events, dataset.generations, manifest).kinds() == ["count_mismatch"]

    def test_schema_checks(self):
        schema = default_schema()
        events = [make_event("e1", not_a_feature=1.0), make_event("e2", timestamp=1, completion_length=3.0)]
        generations = [make_generation("e1"), make_generation("e2")]
        manifest = dataset_stats(events, generations, schema_hash="stale")
        report = validate_dataset(events, generations, manifest, schema)
        kinds = report.kinds()
        assert kinds.count("schema_mismatch") == 2
        assert "schema_hash_mismatch" in kinds

    def test_generated_dataset_is_valid(self, small_dataset, tmp_path):
        save_dataset(small_dataset, tmp_path / "data")
        report = validate_dataset_dir(tmp_path / "data")
        assert report.ok, report.violations[:3]


class TestSplit:
    def test_half_split(self):
        dataset = make_dataset([Outcome.IGNORED] * 30, users=tuple(f"u{i}" for i in range(10)))
        train, test = split_by_user(dataset, 0.5, seed=7)
        assert len(train.users()) == 5
        assert len(test.users()) == 5
        assert not set(train.users()) & set(test.users())
        assert len(train.events) + len(test.events) == 30

    def test_deterministic(self):
        dataset = make_dataset([Outcome.IGNORED] * 30, users=tuple(f"u{i}" for i in range(10)))
        first = split_by_user(dataset, 0.5, seed=7)[1].users()
        second = split_by_user(dataset, 0.5, seed=7)[1].users()
        assert first == second

    def test_test_user_count(self):
        users = tuple(f"u{i:03d}" for i in range(224))
        dataset = make_dataset([Outcome.IGNORED] * 224, users=users)
        _, test = split_by_user(dataset, 98 / 224, seed=0)
        assert len(test.users()) == 98

    def test_manifests_tagged(self):
        dataset = make_dataset([Outcome.ACCEPTED, Outcome.IGNORED] * 4, users=("a", "b", "c", "d"))
        train, test = split_by_user(dataset, 0.25, seed=1)
        assert train.manifest.split == "train"
        assert test.manifest.split == "test"
        assert test.manifest.event_count == len(test.events)

    def test_single_user(self):
        with pytest.raises(SplitError):
            split_by_user(make_dataset([Outcome.IGNORED] * 4), 0.5, seed=0)

    @pytest.mark.parametrize("fraction", [0.0, 1.0, -0.1])
    def test_bad_fraction(self, fraction):
        dataset = make_dataset([Outcome.IGNORED] * 4, users=("a", "b"))
        with pytest.raises(SplitError):
            split_by_user(dataset, fraction, seed=0)


class TestDatasetFiles:
    def test_round_trip(self, tmp_path):
        dataset = make_dataset([Outcome.ACCEPTED, Outcome.EXPLICIT_CANCEL, None], users=("a", "b"))
        save_dataset(dataset, tmp_path)
        loaded = load_dataset(tmp_path)
        assert loaded.events == dataset.events
        assert loaded.generations == dataset.generations
        assert loaded.manifest == dataset.manifest

    def test_infinite_imbalance_is_a_string(self, tmp_path):
        dataset = make_dataset([Outcome.IGNORED] * 2)
        save_dataset(dataset, tmp_path)
        raw = json.loads((tmp_path / "manifest.json").read_text())
        assert raw["label_imbalance_trigger"] == "Infinity"
        assert math.isinf(load_dataset(tmp_path).manifest.label_imbalance_trigger)

    def test_missing_directory(self, tmp_path):
        with pytest.raises(DatasetIOError):
            load_dataset(tmp_path / "nope")

    def test_malformed_line_names_the_line(self, tmp_path):
        save_dataset(make_dataset([Outcome.IGNORED]), tmp_path)
        (tmp_path / "generations.jsonl").write_text('{"event_id": "e0"}\n')
        with pytest.raises(DatasetIOError, match=r"generations\.jsonl:1"):
            load_dataset(tmp_path)

    def test_invalid_utf8_is_an_io_error(self, tmp_path):
        save_dataset(make_dataset([Outcome.IGNORED]), tmp_path)
        (tmp_path / "events.jsonl").write_bytes(b"\xff\xfe{}\n")
        with pytest.raises(DatasetIOError, match="not UTF-8") as info:
            load_dataset(tmp_path)
        assert info.value.code == "io_error"

    def test_pairs_skip_events_without_generation(self):
        events = [make_event("e1"), make_event("e2", timestamp=1)]
        dataset = Dataset(events=events, generations=[make_generation("e2")])
        assert [e.event_id for e, _ in dataset.pairs()] == ["e2"]
