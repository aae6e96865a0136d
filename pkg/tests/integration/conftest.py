import logging

import numpy as np
import pytest

from cgate.calibrate import HardRules, ThresholdPolicy
from cgate.scoring import score_dataset
from cgate.serve import Gate, GateServer
from cgate.synthgen import default_world, generate

logger = logging.getLogger(__name__)

# about 50k events at the default session lengths
LARGE_WORLD_USERS = 420


@pytest.fixture(scope="session")
def large_dataset():
    logger.info(f"Generating {LARGE_WORLD_USERS}-user world")
    return generate(default_world(seed=0, user_count=LARGE_WORLD_USERS))


@pytest.fixture(scope="session")
def median_policy(small_split, trigger_model, filter_model):
    """Thresholds at the median test-split scores, with the compilability rule on."""
    _, test = small_split
    scored = score_dataset(test, trigger_model, filter_model)
    return ThresholdPolicy(
        trigger_threshold=float(np.median(scored.trigger_scores)),
        filter_threshold=float(np.median(scored.filter_scores)),
        hard_rules=HardRules(block_non_compilable=True),
    )


@pytest.fixture
async def gate_server(median_policy, trigger_model, filter_model):
    """A gate service on a free local port."""
    server = GateServer(Gate(median_policy, trigger_model, filter_model), port=0)
    await server.start()
    yield server
    logger.info("Stopping gate service")
    await server.stop()
