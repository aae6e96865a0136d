"""
Pytest configuration file.

This module contains pytest fixtures and configuration for all tests.
"""

import os
import sys

import pytest

# Add the parent directory to the path so tests can import the package
sys.path.insert(0, os.path.dirname(os.path.dirname(os.path.abspath(__file__))))

from cgate.events import (  # noqa: E402
    CompletionEvent,
    Dataset,
    FeatureBag,
    GenerationRecord,
    Outcome,
    dataset_stats,
    split_by_user,
)
from cgate.gbdt import TrainConfig  # noqa: E402
from cgate.synthgen import default_world, generate  # noqa: E402
from cgate.training import train_task  # noqa: E402

SMALL_TREES = TrainConfig(trees=15, max_depth=3, learning_rate=0.2)


def make_event(event_id, user_id="u1", session_id="s1", timestamp=0, context=None, **scalars):
    return CompletionEvent(
        event_id=event_id,
        user_id=user_id,
        session_id=session_id,
        timestamp=timestamp,
        language="python",
        trigger_features=FeatureBag(scalars=scalars),
        context=context,
    )


def make_generation(event_id, outcome=Outcome.IGNORED, completion_length=10, compilable=True):
    return GenerationRecord(
        event_id=event_id,
        completion_length=completion_length,
        filter_features=FeatureBag(),
        compilable=compilable,
        outcome=outcome,
    )


def make_dataset(outcomes, users=("u1",)):
    """A dataset with one event and generation per outcome, spread round-robin over ``users``."""
    events, generations = [], []
    for i, outcome in enumerate(outcomes):
        user = users[i % len(users)]
        events.append(make_event(f"e{i}", user_id=user, session_id=f"{user}-s0", timestamp=i))
        length = 0 if outcome is None else 10
        generations.append(make_generation(f"e{i}", outcome or Outcome.NOT_SHOWN, completion_length=length))
    return Dataset(events=events, generations=generations, manifest=dataset_stats(events, generations))


@pytest.fixture(scope="session")
def small_world():
    return default_world(seed=11, user_count=16)


@pytest.fixture(scope="session")
def small_dataset(small_world):
    return generate(small_world)


@pytest.fixture(scope="session")
def small_split(small_dataset):
    return split_by_user(small_dataset, 0.25, seed=3)


@pytest.fixture(scope="session")
def trigger_model(small_split):
    train, _ = small_split
    return train_task(train, "trigger", SMALL_TREES)


@pytest.fixture(scope="session")
def filter_model(small_split):
    train, _ = small_split
    return train_task(train, "filter", SMALL_TREES)


# Register marks
def pytest_configure(config):
    """Register custom pytest marks."""
    config.addinivalue_line("markers", "slow: mark test as slow running")
    config.addinivalue_line("markers", "integration: mark test as integration test")
