"""
Gate decisions shared by the library path and the service.
"""

from dataclasses import dataclass
from pathlib import Path

from ..calibrate.policy import ThresholdPolicy, load_policy
from ..events.types import FeatureBag
from ..exceptions import ConfigurationError, SchemaMismatchError
from ..features.schema import FeatureSchema
from ..logging import logger
from ..scoring import NO_MODEL_SCORE, Scorer, load_model
from .protocol import GateRequest, Kind


@dataclass(frozen=True)
class Decision:
    passed: bool
    score: float
    threshold: float
    rule_hit: str | None = None


def decide(
    kind: Kind,
    model: Scorer | None,
    policy: ThresholdPolicy,
    bag: FeatureBag,
    context: str | None = None,
    compilable: bool = True,
) -> Decision:
    """Score ``bag`` and apply the policy; a kind without a model scores ``NO_MODEL_SCORE``."""
    score = NO_MODEL_SCORE if model is None else model.score_bag(bag, context)
    if kind == "trigger":
        return Decision(policy.trigger_passes(score), score, policy.trigger_threshold)
    passed, rule = policy.filter_decision(score, compilable)
    return Decision(passed, score, policy.filter_threshold, rule)


class Gate:
    """Immutable pair of gate models plus the policy that thresholds them."""

    def __init__(self, policy: ThresholdPolicy, trigger: Scorer | None = None, filter: Scorer | None = None):
        if trigger is None and filter is None:
            raise ConfigurationError("a gate needs at least one model")
        for kind, model in (("trigger", trigger), ("filter", filter)):
            if model is not None and model.view != kind:
                raise ConfigurationError(f"the {kind} model was trained for the {model.view} view")
        hashes = {m.schema_hash for m in (trigger, filter) if m is not None}
        if len(hashes) > 1:
            raise SchemaMismatchError(f"trigger and filter models disagree on the feature schema: {sorted(hashes)}")
        self.policy = policy
        self.trigger = trigger
        self.filter = filter
        self.schema_hash = hashes.pop()
        model = trigger or filter
        encoder = getattr(model, "encoder", None)
        self.schema: FeatureSchema | None = encoder.feature_schema if encoder is not None else None
        self._known = frozenset(e.name for e in self.schema.entries) if self.schema is not None else None

    @classmethod
    def load(
        cls, policy_path: str | Path, trigger_path: str | Path | None = None, filter_path: str | Path | None = None
    ) -> "Gate":
        """Load artifacts; refuses mismatched schemas or views.

        Raises:
            SchemaMismatchError: if the models were trained against different schemas.
            ConfigurationError: if no model is given or a model has the wrong view.
        """
        trigger = load_model(trigger_path) if trigger_path is not None else None
        filter = load_model(filter_path) if filter_path is not None else None
        gate = cls(load_policy(policy_path), trigger, filter)
        logger.info(f"Loaded gate (trigger={trigger_path}, filter={filter_path}, schema {gate.schema_hash[:12]})")
        return gate

    def model_for(self, kind: Kind) -> Scorer | None:
        return self.trigger if kind == "trigger" else self.filter

    def unknown_features(self, bag: FeatureBag) -> list[str]:
        if self._known is None:
            return []
        return sorted(bag.names() - self._known)

    def decide(self, request: GateRequest) -> Decision:
        return decide(
            request.kind,
            self.model_for(request.kind),
            self.policy,
            request.features,
            request.context,
            request.compilable,
        )
