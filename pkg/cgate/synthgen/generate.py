"""
Open-loop and closed-loop dataset generation.

The open loop logs every opportunity with its generation and outcome, as a gates-off
collection would. The closed loop runs a gating policy inside the simulation: blocked
opportunities produce generation-less events and, with dependence enabled, follow-up
opportunities while the simulated developer keeps typing.
"""

from collections.abc import Callable
from dataclasses import dataclass, field

from ..calibrate.policy import ThresholdPolicy
from ..events.dataset import Dataset
from ..events.stats import dataset_stats
from ..events.types import CompletionEvent, GenerationRecord, GroundTruthRecord, Outcome, merged_features
from ..exceptions import ClosedLoopError
from ..logging import logger
from ..scoring import Scorer
from .config import WorldConfig
from .world import GENERATOR_VERSION, MAX_CHILD_DEPTH, Opportunity, World

TriggerScore = Callable[[CompletionEvent], float]
FilterScore = Callable[[CompletionEvent, GenerationRecord], float]


@dataclass
class UserLoopStats:
    user_id: str
    opportunities: int = 0
    generations: int = 0
    blocked: int = 0
    shown: int = 0
    accepted: int = 0
    symbols_completed: int = 0
    symbols_written: int = 0

    @property
    def rocc(self) -> float | None:
        """Completed symbols over all symbols written, or None when nothing was written."""
        return self.symbols_completed / self.symbols_written if self.symbols_written else None


@dataclass
class ClosedLoopResult:
    dataset: Dataset
    users: list[UserLoopStats] = field(default_factory=list)
    trigger_oracle: dict[str, float] = field(default_factory=dict)

    @property
    def generations(self) -> int:
        return sum(u.generations for u in self.users)

    @property
    def opportunities(self) -> int:
        return sum(u.opportunities for u in self.users)

    @property
    def blocked(self) -> int:
        return sum(u.blocked for u in self.users)

    @property
    def block_rate(self) -> float:
        return self.blocked / self.opportunities if self.opportunities else 0.0

    @property
    def symbols_completed(self) -> int:
        return sum(u.symbols_completed for u in self.users)

    @property
    def rocc(self) -> float | None:
        written = sum(u.symbols_written for u in self.users)
        return self.symbols_completed / written if written else None

    def generation_reduction(self, baseline: "ClosedLoopResult") -> float:
        """Relative drop in total generations against a baseline run on the same world."""
        if baseline.generations == 0:
            return 0.0
        return 1.0 - self.generations / baseline.generations

    def per_user_generation_reduction(self, baseline: "ClosedLoopResult") -> float:
        """Mean over users of each user's relative drop in generations."""
        ours = {u.user_id: u.generations for u in self.users}
        drops = [1.0 - ours.get(u.user_id, 0) / u.generations for u in baseline.users if u.generations]
        return sum(drops) / len(drops) if drops else 0.0


def _trigger_function(trigger: Scorer | TriggerScore | None) -> TriggerScore | None:
    if trigger is None:
        return None
    if isinstance(trigger, Scorer):
        return lambda event: trigger.score_bag(event.trigger_features, event.context)
    return trigger


def _filter_function(filter: Scorer | FilterScore | None) -> FilterScore | None:
    if filter is None:
        return None
    if isinstance(filter, Scorer):
        return lambda event, generation: filter.score_bag(merged_features(event, generation), event.context)
    return filter


def _run(
    world: World,
    policy: ThresholdPolicy,
    trigger: TriggerScore | None,
    filter: FilterScore | None,
    inject: bool,
) -> tuple[list[CompletionEvent], list[GenerationRecord], dict[str, GroundTruthRecord], list[UserLoopStats], dict]:
    events: list[CompletionEvent] = []
    oracle: dict[str, float] = {}
    generations: list[GenerationRecord] = []
    truth: dict[str, GroundTruthRecord] = {}
    all_stats: list[UserLoopStats] = []

    def visit(opp: Opportunity, stats: UserLoopStats, depth: int, make_child) -> None:
        events.append(opp.event)
        truth[opp.event.event_id] = opp.truth
        oracle[opp.event.event_id] = opp.trigger_oracle
        stats.opportunities += 1
        score = opp.trigger_oracle if trigger is None else trigger(opp.event)
        if not policy.trigger_passes(score):
            stats.blocked += 1
            if inject and depth < MAX_CHILD_DEPTH:
                for j in range(opp.children):
                    visit(make_child(opp, j), stats, depth + 1, make_child)
            return
        stats.generations += 1
        generation = opp.generation
        if generation.outcome.shown:
            filter_score = opp.truth.accept_given_show if filter is None else filter(opp.event, generation)
            passed, _ = policy.filter_decision(filter_score, generation.compilable)
            if not passed:
                generation = generation.model_copy(update={"outcome": Outcome.NOT_SHOWN})
        generations.append(generation)
        if generation.outcome.shown:
            stats.shown += 1
        if generation.outcome is Outcome.ACCEPTED:
            stats.accepted += 1
            stats.symbols_completed += generation.completion_length

    for user_index in range(world.config.user_count):
        user = world.user(user_index)
        stats = UserLoopStats(user_id=user.user_id)
        for session_index in range(user.sessions):
            plan = world.session(user, session_index)
            accepted_before = cancelled_before = 0
            for slot, timestamp in enumerate(plan.timestamps):
                counters = (accepted_before, cancelled_before)

                def make_child(parent: Opportunity, j: int, slot=slot, counters=counters, plan=plan, user=user):
                    window = parent.window_ms
                    return world.opportunity(
                        user,
                        plan,
                        slot,
                        parent.event.timestamp + int(window * (1.0 - 2.0 ** -(j + 1))),
                        counters,
                        path=(*parent.path, j),
                        window_ms=int(window * 2.0 ** -(j + 2)),
                        parent=parent,
                    )

                opp = world.opportunity(user, plan, slot, timestamp, counters)
                stats.symbols_written += opp.typed_symbols
                if opp.would_accept:
                    stats.symbols_written += opp.generation.completion_length
                visit(opp, stats, 0, make_child)
                accepted_before += opp.would_accept
                cancelled_before += opp.would_cancel
        all_stats.append(stats)
    return events, generations, truth, all_stats, oracle


def _dataset(world: World, events, generations, truth, collection_policy: str) -> Dataset:
    schema_hash = world.schema.schema_hash()
    manifest = dataset_stats(
        events,
        generations,
        schema_hash=schema_hash,
        collection_policy=collection_policy,
        generator=GENERATOR_VERSION,
    )
    return Dataset(events=events, generations=generations, manifest=manifest, schema=world.schema, ground_truth=truth)


def generate(config: WorldConfig) -> Dataset:
    """Gates-off telemetry: one generation per event, outcomes drawn from the ground truth.

    Raises:
        SynthConfigError: if the world has no users or names unknown effects.
    """
    world = World(config)
    events, generations, truth, _, _ = _run(world, ThresholdPolicy.pass_all(), None, None, inject=False)
    logger.info(f"Generated {len(events)} events for {config.user_count} users (seed {config.seed})")
    return _dataset(world, events, generations, truth, "gates_off")


def generate_closed_loop(
    config: WorldConfig,
    policy: ThresholdPolicy,
    trigger: Scorer | TriggerScore | None = None,
    filter: Scorer | FilterScore | None = None,
) -> ClosedLoopResult:
    """Run ``policy`` inside the simulation.

    ``trigger`` and ``filter`` may be models, plain score functions or None for the
    world's own trigger-stage and accept-given-show probabilities. Hard rules always
    apply.

    Raises:
        ClosedLoopError: if the world has no dependence model enabled.
    """
    if not config.dependence.enabled:
        raise ClosedLoopError("dependence is disabled; use generate for open-loop data")
    world = World(config)
    events, generations, truth, stats, oracle = _run(
        world, policy, _trigger_function(trigger), _filter_function(filter), inject=True
    )
    result = ClosedLoopResult(
        dataset=_dataset(world, events, generations, truth, "active"), users=stats, trigger_oracle=oracle
    )
    logger.info(
        f"Closed loop over {config.user_count} users: {result.opportunities} opportunities, "
        f"{result.blocked} blocked, {result.generations} generations"
    )
    return result
