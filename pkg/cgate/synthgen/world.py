"""
Deterministic world sampler.

Every random draw comes from a ``numpy`` generator seeded by the world seed and the
identity of what is being drawn (user, session, slot, injected-child path), so an
opportunity looks the same whichever policy is running and whatever was generated
before it. Acceptance is logistic in feature effects, a per-user intercept and a
context signal; offsets are calibrated on a pilot sample so the funnel rates match
the configuration.
"""

import math
from bisect import bisect_right
from collections.abc import Callable
from dataclasses import dataclass, field
from itertools import accumulate

import numpy as np

from ..events.types import CompletionEvent, FeatureBag, GenerationRecord, GroundTruthRecord, Outcome
from ..exceptions import SynthConfigError
from ..features.schema import FeatureSchema, default_schema
from ..logging import logger
from .config import BehaviorProfile, WorldConfig

GENERATOR_VERSION = "cgate-synthgen/1"

PILOT_OPPORTUNITIES = 4000
NON_COMPILABLE_EFFECT = -3.0
MIN_SLOT_GAP_MS = 2000
MAX_CHILD_DEPTH = 8

_TOKEN_KEY = 2**31
_PILOT_KEY = 2**31 + 1

NODE_KINDS: dict[str, tuple[float, float]] = {
    # name: (frequency, acceptance effect)
    "identifier": (0.30, 0.3),
    "call_argument": (0.15, 0.4),
    "statement_start": (0.20, -0.2),
    "member_access": (0.12, 0.6),
    "string_literal": (0.06, -0.6),
    "comment": (0.07, -0.8),
    "block_end": (0.06, -0.3),
    "import": (0.04, 0.5),
}
EDITOR_ACTIONS: dict[str, tuple[float, float]] = {
    "typing": (0.62, 0.2),
    "delete": (0.12, -0.4),
    "paste": (0.04, -0.3),
    "caret_move": (0.10, -0.2),
    "undo": (0.03, -0.5),
    "completion_accept": (0.05, 0.4),
    "completion_cancel": (0.04, -0.6),
}
LANGUAGE_EXTENSIONS = {"kotlin": "kt", "python": "py", "java": "java", "csharp": "cs", "php": "php"}
HOUR_BUCKETS = ("night", "morning", "afternoon", "evening")

EFFECT_FEATURES = frozenset(
    {
        "typing_speed",
        "ms_since_last_keystroke",
        "prefix_length",
        "caret_column",
        "session_accept_count",
        "syntactic_node_kind",
        "last_editor_action",
        "in_comment",
        "in_string",
        "after_member_access",
        "caret_at_line_end",
        "has_selection",
        "mean_token_logprob",
        "completion_length",
        "repeats_suffix",
    }
)

_NODE_NAMES = list(NODE_KINDS)
_NODE_CUMULATIVE = list(accumulate(f for f, _ in NODE_KINDS.values()))
_ACTION_NAMES = list(EDITOR_ACTIONS)
_ACTION_CUMULATIVE = list(accumulate(f for f, _ in EDITOR_ACTIONS.values()))


def logistic(x: float) -> float:
    return 0.5 * (1.0 + math.tanh(0.5 * x))


class Draws:
    """Uniform and normal variates pulled from a generator in a fixed order."""

    def __init__(self, rng: np.random.Generator, chunk: int = 32):
        self.rng = rng
        self._chunk = chunk
        self._uniforms: list[float] = []
        self._normals: list[float] = []

    def u(self) -> float:
        if not self._uniforms:
            self._uniforms = self.rng.random(self._chunk).tolist()[::-1]
        return self._uniforms.pop()

    def z(self) -> float:
        if not self._normals:
            self._normals = self.rng.standard_normal(self._chunk // 2).tolist()[::-1]
        return self._normals.pop()

    def exponential(self, scale: float) -> float:
        return -scale * math.log1p(-self.u())

    def pick(self, cumulative: list[float]) -> int:
        return min(bisect_right(cumulative, self.u() * cumulative[-1]), len(cumulative) - 1)

    def poisson(self, lam: float) -> int:
        return int(self.rng.poisson(lam)) if lam > 0 else 0


@dataclass(frozen=True)
class SimUser:
    index: int
    user_id: str
    profile_index: int
    profile: BehaviorProfile
    intercept: float
    speed_mean: float
    language: str
    sessions: int
    start_ms: int


@dataclass(frozen=True)
class SessionPlan:
    session_id: str
    index: int
    timestamps: list[int]
    hour_bucket: str


@dataclass
class Draft:
    """Features and linear predictors of one opportunity before any outcome is drawn."""

    trigger: FeatureBag
    filter: FeatureBag
    context: str
    completion_length: int
    compilable: bool
    show_part: float
    trigger_part: float
    accept_part: float


@dataclass
class Opportunity:
    event: CompletionEvent
    generation: GenerationRecord
    truth: GroundTruthRecord
    trigger_oracle: float
    typed_symbols: int
    children: int
    window_ms: int
    path: tuple[int, ...] = field(default_factory=tuple)

    @property
    def would_accept(self) -> bool:
        return self.generation.outcome is Outcome.ACCEPTED

    @property
    def would_cancel(self) -> bool:
        return self.generation.outcome is Outcome.EXPLICIT_CANCEL


def _bisect_offset(rate_at: Callable[[float], float], target: float, lo: float = -30.0, hi: float = 30.0) -> float:
    """Offset b with rate_at(b) == target for a rate increasing in b."""
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if rate_at(mid) < target:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _sigmoid_array(x: np.ndarray) -> np.ndarray:
    return 0.5 * (1.0 + np.tanh(0.5 * x))


class World:
    """A configured synthetic population with calibrated show and accept offsets."""

    def __init__(self, config: WorldConfig, schema: FeatureSchema | None = None):
        if config.user_count == 0:
            raise SynthConfigError("user_count must be positive")
        for share in config.profiles:
            unknown = set(share.profile.feature_effect_weights) - EFFECT_FEATURES
            if unknown:
                raise SynthConfigError(
                    f"profile {share.profile.name!r} has effects for unknown features {sorted(unknown)}"
                )
        self.config = config
        self.schema = schema or default_schema()
        self.profiles = [share.profile for share in config.profiles]
        self._profile_cumulative = list(accumulate(share.weight for share in config.profiles))
        self._language_names = [share.name for share in config.languages]
        self._language_cumulative = list(accumulate(share.weight for share in config.languages))
        self.token_effects = self.rng(_TOKEN_KEY).standard_normal(config.signal_vocabulary).tolist()
        self.show_offset = 0.0
        self.accept_offsets = [0.0] * len(self.profiles)
        self._calibrate()

    def rng(self, *key: int) -> np.random.Generator:
        return np.random.default_rng(np.random.SeedSequence(self.config.seed, spawn_key=key))

    def user(self, index: int) -> SimUser:
        draws = Draws(self.rng(index))
        profile_index = draws.pick(self._profile_cumulative)
        profile = self.profiles[profile_index]
        language = self._language_names[draws.pick(self._language_cumulative)]
        intercept = profile.user_intercept_std * draws.z()
        speed_mean = max(1.0, profile.typing_speed_mean + profile.typing_speed_std * draws.z())
        sessions = 1 + draws.poisson(self.config.sessions_per_user - 1.0)
        start_ms = self.config.start_timestamp + index * 86_400_000 + int(draws.u() * 43_200_000)
        return SimUser(
            index=index,
            user_id=f"u{index:05d}",
            profile_index=profile_index,
            profile=profile,
            intercept=intercept,
            speed_mean=speed_mean,
            language=language,
            sessions=sessions,
            start_ms=start_ms,
        )

    def session(self, user: SimUser, index: int) -> SessionPlan:
        draws = Draws(self.rng(user.index, index))
        slots = 1 + draws.poisson(user.profile.session_length_mean - 1.0)
        start = user.start_ms + index * 21_600_000 + int(draws.u() * 10_800_000)
        timestamps = [start]
        for _ in range(slots - 1):
            timestamps.append(timestamps[-1] + MIN_SLOT_GAP_MS + int(draws.exponential(8000.0)))
        hour = (start // 3_600_000) % 24
        return SessionPlan(
            session_id=f"{user.user_id}-s{index:03d}",
            index=index,
            timestamps=timestamps,
            hour_bucket=HOUR_BUCKETS[hour // 6],
        )

    def _draft(
        self,
        draws: Draws,
        user: SimUser,
        counters: tuple[int, int],
        event_index: int,
        hour_bucket: str,
        length_override: int | None = None,
    ) -> Draft:
        config = self.config
        profile = user.profile
        weights = profile.feature_effect_weights
        effect = weights.get

        def maybe(value):
            return None if draws.u() < config.missing_rate else value

        typing_speed = max(0.5, user.speed_mean + draws.z())
        s_speed = (typing_speed - profile.typing_speed_mean) / math.sqrt(profile.typing_speed_std**2 + 1.0)
        since_keystroke = 20.0 + draws.exponential(400.0)
        s_since = (math.log((since_keystroke - 20.0) / 400.0 + 1e-9) + 0.5772) / 1.2825
        z_prefix = draws.z()
        prefix_length = round(math.exp(6.0 + z_prefix))
        caret_line = 1 + int(draws.u() * 800)
        line_length = int(draws.u() * 100)
        caret_column = int(draws.u() * (line_length + 1))
        s_column = max(-3.0, min(3.0, (caret_column - 25.0) / 20.0))
        indent_depth = int(draws.u() * 6)
        accepted_before, cancelled_before = counters
        s_accepts = min(accepted_before, 10) / 3.0 - 0.5

        node = _NODE_NAMES[draws.pick(_NODE_CUMULATIVE)]
        action = _ACTION_NAMES[draws.pick(_ACTION_CUMULATIVE)]
        has_selection = draws.u() < 0.03
        in_comment = node == "comment"
        in_string = node == "string_literal"
        after_member = node == "member_access"
        at_line_end = caret_column == line_length

        n_tokens = max(1, config.context_tokens // 2 + int(draws.u() * config.context_tokens))
        tokens = []
        signal = 0.0
        for _ in range(n_tokens):
            if draws.u() < 0.5:
                k = int(draws.u() * config.signal_vocabulary)
                tokens.append(f"sym{k}")
                signal += self.token_effects[k]
            else:
                tokens.append(f"tok{int(draws.u() * config.noise_vocabulary)}")
        context_score = signal / math.sqrt(0.5 * n_tokens)

        if length_override is not None:
            length = length_override
        elif draws.u() < config.empty_rate:
            length = 0
        else:
            length = max(1, round(math.exp(math.log(35.0) + 0.7 * draws.z())))
        lines = 0 if length == 0 else 1 + length // 70
        kind = "single_line" if lines <= 1 else ("multi_line" if lines <= 3 else "block")
        quality = draws.z()
        logprob = -0.8 + 0.3 * quality + 0.2 * draws.z()
        latency = 60.0 + 1.5 * length + draws.exponential(30.0)
        compilable = draws.u() >= config.non_compilable_rate
        repeats = draws.u() < 0.05
        s_length = (math.log(length) - math.log(35.0)) / 0.7 if length > 0 else 0.0

        trigger_effect = (
            effect("typing_speed", 0.0) * s_speed
            + effect("ms_since_last_keystroke", 0.0) * s_since
            + effect("prefix_length", 0.0) * z_prefix
            + effect("caret_column", 0.0) * s_column
            + effect("session_accept_count", 0.0) * s_accepts
            + effect("syntactic_node_kind", 0.0) * NODE_KINDS[node][1]
            + effect("last_editor_action", 0.0) * EDITOR_ACTIONS[action][1]
            + effect("in_comment", 0.0) * in_comment
            + effect("in_string", 0.0) * in_string
            + effect("after_member_access", 0.0) * after_member
            + effect("caret_at_line_end", 0.0) * at_line_end
            + effect("has_selection", 0.0) * has_selection
        )
        trigger_part = user.intercept + trigger_effect + profile.context_signal_strength * context_score
        filter_effect = (
            effect("mean_token_logprob", 0.0) * quality
            + effect("completion_length", 0.0) * s_length
            + effect("repeats_suffix", 0.0) * repeats
            + (0.0 if compilable else NON_COMPILABLE_EFFECT)
        )
        show_part = 0.6 * s_since - 0.4 * s_speed - 1.0 * has_selection

        trigger = FeatureBag(
            scalars={
                "typing_speed": maybe(round(typing_speed, 3)),
                "ms_since_last_keystroke": maybe(round(since_keystroke, 1)),
                "prefix_length": maybe(float(prefix_length)),
                "caret_line": float(caret_line),
                "caret_column": float(caret_column),
                "line_length": float(line_length),
                "indent_depth": float(indent_depth),
                "session_accept_count": float(accepted_before),
                "session_cancel_count": float(cancelled_before),
                "session_event_index": float(event_index),
            },
            categoricals={
                "syntactic_node_kind": node,
                "last_editor_action": maybe(action),
                "file_extension": LANGUAGE_EXTENSIONS.get(user.language),
                "hour_bucket": hour_bucket,
                "language": user.language,
            },
            flags={
                "in_comment": in_comment,
                "in_string": in_string,
                "caret_at_line_end": at_line_end,
                "after_member_access": after_member,
                "has_selection": has_selection,
            },
        )
        filter_bag = FeatureBag(
            scalars={
                "generation_latency_ms": maybe(round(latency, 1)),
                "mean_token_logprob": maybe(round(logprob, 4)),
                "context_token_count": float(n_tokens),
                "completion_length": float(length),
                "completion_line_count": float(lines),
            },
            categoricals={"completion_kind": kind if length > 0 else None},
            flags={"static_compilable": compilable, "repeats_suffix": repeats},
        )
        return Draft(
            trigger=trigger,
            filter=filter_bag,
            context=" ".join(tokens),
            completion_length=length,
            compilable=compilable,
            show_part=show_part,
            trigger_part=trigger_part,
            accept_part=trigger_part + filter_effect,
        )

    def opportunity(
        self,
        user: SimUser,
        session: SessionPlan,
        slot: int,
        timestamp: int,
        counters: tuple[int, int],
        path: tuple[int, ...] = (),
        window_ms: int = MIN_SLOT_GAP_MS,
        parent: Opportunity | None = None,
    ) -> Opportunity:
        """Sample one opportunity with its would-be generation and open-loop outcome.

        An injected opportunity (non-empty ``path``) continues its blocked parent: its
        completion covers part of what the parent's would have, and it can only be
        accepted when the parent would have been.
        """
        draws = Draws(self.rng(user.index, session.index, slot, *(j + 1 for j in path)))
        length_override = None
        if parent is not None:
            siblings = parent.children
            parent_length = parent.generation.completion_length
            remaining = parent_length - math.ceil(parent_length / (siblings + 1))
            length_override = remaining // siblings
        draft = self._draft(draws, user, counters, slot, session.hour_bucket, length_override)

        p_show = 0.0 if draft.completion_length == 0 else logistic(self.show_offset + draft.show_part)
        offset = self.accept_offsets[user.profile_index]
        p_accept = logistic(offset + draft.accept_part)
        if parent is not None and not parent.would_accept:
            p_accept = 0.0
        shown = draws.u() < p_show
        accepted = shown and draws.u() < p_accept
        cancelled = shown and not accepted and draws.u() < user.profile.cancel_propensity
        typed = 20 + int(draws.u() * 40)
        children = draws.poisson(self.config.dependence.opportunity_boost)

        if not shown:
            outcome = Outcome.NOT_SHOWN
        elif accepted:
            outcome = Outcome.ACCEPTED
        elif cancelled:
            outcome = Outcome.EXPLICIT_CANCEL
        else:
            outcome = Outcome.IGNORED

        event_id = f"{session.session_id}-e{slot:04d}" + "".join(f"-c{j}" for j in path)
        event = CompletionEvent(
            event_id=event_id,
            user_id=user.user_id,
            session_id=session.session_id,
            timestamp=timestamp,
            language=user.language,
            trigger_features=draft.trigger,
            context=draft.context,
        )
        generation = GenerationRecord(
            event_id=event_id,
            completion_length=draft.completion_length,
            filter_features=draft.filter,
            compilable=draft.compilable,
            outcome=outcome,
        )
        truth = GroundTruthRecord(
            event_id=event_id,
            accept_probability=p_show * p_accept,
            show_probability=p_show,
            accept_given_show=p_accept,
        )
        return Opportunity(
            event=event,
            generation=generation,
            truth=truth,
            trigger_oracle=p_show * logistic(offset + draft.trigger_part),
            typed_symbols=typed,
            children=children,
            window_ms=window_ms,
            path=path,
        )

    def _pilot(self, profile_index: int) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        profile = self.profiles[profile_index]
        show, accept, nonempty = [], [], []
        for i in range(PILOT_OPPORTUNITIES):
            draws = Draws(self.rng(_PILOT_KEY, profile_index, i))
            user = SimUser(
                index=-1,
                user_id="pilot",
                profile_index=profile_index,
                profile=profile,
                intercept=profile.user_intercept_std * draws.z(),
                speed_mean=max(1.0, profile.typing_speed_mean + profile.typing_speed_std * draws.z()),
                language=self._language_names[draws.pick(self._language_cumulative)],
                sessions=1,
                start_ms=0,
            )
            counters = (int(draws.u() * 4), int(draws.u() * 3))
            draft = self._draft(draws, user, counters, int(draws.u() * 40), HOUR_BUCKETS[int(draws.u() * 4)])
            show.append(draft.show_part)
            accept.append(draft.accept_part)
            nonempty.append(draft.completion_length > 0)
        return np.array(show), np.array(accept), np.array(nonempty, dtype=np.float64)

    def _calibrate(self) -> None:
        pilots = [self._pilot(i) for i in range(len(self.profiles))]
        shares = [share.weight for share in self.config.profiles]

        def show_rate(offset: float) -> float:
            return sum(
                w * float(np.mean(_sigmoid_array(offset + show) * nonempty))
                for w, (show, _, nonempty) in zip(shares, pilots, strict=True)
            )

        self.show_offset = _bisect_offset(show_rate, self.config.show_rate)
        for i, (show, accept, nonempty) in enumerate(pilots):
            p_show = _sigmoid_array(self.show_offset + show) * nonempty
            target = self.profiles[i].base_accept_rate

            def accept_rate(offset: float, p_show=p_show, accept=accept) -> float:
                return float(np.dot(p_show, _sigmoid_array(offset + accept)) / p_show.sum())

            self.accept_offsets[i] = _bisect_offset(accept_rate, target)
        logger.debug(f"Calibrated show offset {self.show_offset:.4f}, accept offsets {self.accept_offsets}")
