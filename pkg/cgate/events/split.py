import numpy as np

from ..exceptions import SplitError
from ..logging import logger
from .dataset import Dataset
from .stats import dataset_stats


def _subset(dataset: Dataset, users: set[str], split: str) -> Dataset:
    events = [e for e in dataset.events if e.user_id in users]
    kept = {e.event_id for e in events}
    generations = [g for g in dataset.generations if g.event_id in kept]
    base = dataset.manifest
    manifest = dataset_stats(
        events,
        generations,
        schema_hash=base.schema_hash if base else (dataset.schema.schema_hash() if dataset.schema else ""),
        split=split,
        collection_policy=base.collection_policy if base else "gates_off",
        generator=base.generator if base else None,
    )
    ground_truth = {k: v for k, v in dataset.ground_truth.items() if k in kept}
    return Dataset(
        events=events, generations=generations, manifest=manifest, schema=dataset.schema, ground_truth=ground_truth
    )


def split_by_user(dataset: Dataset, test_fraction: float, seed: int) -> tuple[Dataset, Dataset]:
    """Split into (train, test) with disjoint user sets.

    The number of test users is ``round(test_fraction * users)``, clamped so that both
    sides keep at least one user; assignment depends only on the sorted user ids and seed.
    """
    if not 0.0 < test_fraction < 1.0:
        raise SplitError(f"test_fraction must lie in (0, 1), got {test_fraction}")
    users = dataset.users()
    if len(users) < 2:
        raise SplitError(f"cannot split a dataset with {len(users)} user(s)")

    n_test = min(max(round(test_fraction * len(users)), 1), len(users) - 1)
    order = np.random.default_rng(seed).permutation(len(users))
    test_users = {users[i] for i in order[:n_test]}
    train_users = set(users) - test_users
    logger.info(f"Split {len(users)} users into {len(train_users)} train / {len(test_users)} test")
    return _subset(dataset, train_users, "train"), _subset(dataset, test_users, "test")
