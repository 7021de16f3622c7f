"""Synthetic game and commentary generator with known gold matchings.

Everything stochastic flows through one splitmix64 stream per generator so a
(config, profile) pair yields byte-identical corpora on every run and
platform.  The draw order is part of the contract:

  simulate_events: per event, one uniform for the gap, one for the predicate,
  then one per argument.

  commentate: per event, one uniform for the comment decision, then (only if
  commented) one for the lag, one for the template, and one per argument
  position for its surface form.  After the event pass, one uniform per
  normal comment decides whether to add a superfluous comment; each addition
  draws one uniform for its time, one for its length, and one per word.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from pathlib import Path

from . import mrl
from .corpus import (
    DEFAULT_WINDOW_MS,
    Comment,
    Corpus,
    Game,
    GameEvent,
    GoldMatch,
    make_comment,
    resolve_gold_event,
)

_MASK = (1 << 64) - 1
_GOLDEN = 0x9E3779B97F4A7C15


class EmptyLexicon(ValueError):
    """A commentable predicate has no usable template."""


class Prng:
    """splitmix64: tiny, fast, and identical across implementations."""

    __slots__ = ("state",)

    def __init__(self, seed: int) -> None:
        self.state = seed & _MASK

    def next(self) -> int:
        self.state = (self.state + _GOLDEN) & _MASK
        z = self.state
        z = ((z ^ (z >> 30)) * 0xBF58476D1CE4E5B9) & _MASK
        z = ((z ^ (z >> 27)) * 0x94D049BB133111EB) & _MASK
        return z ^ (z >> 31)

    def uniform(self) -> float:
        return self.next() / 2**64

    def uniform_int(self, lo: int, hi: int) -> int:
        """Uniform integer in [lo, hi], both ends inclusive."""
        return lo + int(self.uniform() * (hi - lo + 1))

    def weighted_index(self, weights: list[float]) -> int:
        total = sum(weights)
        u = self.uniform() * total
        acc = 0.0
        for i, w in enumerate(weights):
            acc += w
            if u < acc:
                return i
        return len(weights) - 1


def prng_next(prng: Prng) -> int:
    return prng.next()


def prng_uniform(prng: Prng) -> float:
    return prng.uniform()


def derive_seed(base: int, index: int, stream: int) -> int:
    """Decorrelated per-game seed for a numbered stream (0 world, 1 commentary)."""
    mixed = (base + _GOLDEN * index + 0x632BE59BD9B4E019 * stream) & _MASK
    return Prng(mixed).next()


@dataclass(frozen=True)
class WorldConfig:
    duration_ms: int
    mean_event_gap_ms: int
    event_type_weights: dict[str, float]
    seed: int

    def __post_init__(self) -> None:
        if self.duration_ms <= 0:
            raise ValueError("duration_ms must be positive")
        if any(w < 0 for w in self.event_type_weights.values()):
            raise ValueError("event weights must be nonnegative")
        if not any(w > 0 for w in self.event_type_weights.values()):
            raise ValueError("at least one event weight must be positive")


Template = tuple[tuple[str, ...], float]


@dataclass(frozen=True)
class CommentatorProfile:
    comment_prob: dict[str, float]
    lexicon: dict[str, list[Template]]
    superfluous_rate: float
    lag_ms_range: tuple[int, int]
    superfluous_vocabulary: tuple[str, ...]
    seed: int
    language: str = "en"

    def __post_init__(self) -> None:
        for name, p in self.comment_prob.items():
            if not 0.0 <= p <= 1.0:
                raise ValueError(f"comment_prob[{name}] out of [0,1]")
        if not 0.0 <= self.superfluous_rate:
            raise ValueError("superfluous_rate must be nonnegative")
        lo, hi = self.lag_ms_range
        if lo < 0 or hi < lo:
            raise ValueError("lag_ms_range must satisfy 0 <= min <= max")


def _slot_marker(position: int) -> str:
    return f"<{position}>"


def _validate_templates(profile: CommentatorProfile) -> None:
    for predicate in mrl.PREDICATES:
        if profile.comment_prob.get(predicate.name, 0.0) <= 0.0:
            continue
        templates = profile.lexicon.get(predicate.name, [])
        if not templates:
            raise EmptyLexicon(f"no template for commentable predicate {predicate.name}")
        wanted = {_slot_marker(i + 1) for i in range(predicate.arity)}
        for words, _ in templates:
            slots = [w for w in words if w.startswith("<") and w.endswith(">")]
            if set(slots) != wanted or len(slots) != predicate.arity:
                raise ValueError(
                    f"template for {predicate.name} must use exactly slots "
                    f"{sorted(wanted)}: {' '.join(words)}"
                )


def simulate_events(config: WorldConfig) -> list[GameEvent]:
    """Event trace with geometric gaps and weight-proportional predicates."""
    prng = Prng(config.seed)
    names = [p.name for p in mrl.PREDICATES if config.event_type_weights.get(p.name, 0.0) > 0]
    weights = [config.event_type_weights[n] for n in names]
    predicates = {p.name: p for p in mrl.PREDICATES}
    by_sort = {
        mrl.PLAYER: [mrl.Constant(t, mrl.PLAYER) for t in mrl.PLAYER_TOKENS],
        mrl.PLAYMODE: [mrl.Constant(t, mrl.PLAYMODE) for t in mrl.PLAYMODE_TOKENS],
    }

    events: list[GameEvent] = []
    t = 0
    while True:
        t += _geometric_gap(prng.uniform(), config.mean_event_gap_ms)
        if t >= config.duration_ms:
            break
        predicate = predicates[names[prng.weighted_index(weights)]]
        args = tuple(
            by_sort[sort][prng.uniform_int(0, len(by_sort[sort]) - 1)]
            for sort in predicate.argument_sorts
        )
        mr = mrl.MeaningRepresentation(predicate, args)
        events.append(GameEvent(t, mr, len(events)))
    return events


def _geometric_gap(u: float, mean_gap_ms: int) -> int:
    if mean_gap_ms <= 1:
        return 1
    p = 1.0 / mean_gap_ms
    return 1 + int(math.log(1.0 - u) / math.log(1.0 - p))


def _realize(
    prng: Prng,
    profile: CommentatorProfile,
    template: tuple[str, ...],
    mr: mrl.MeaningRepresentation,
) -> list[str]:
    surfaces: dict[str, tuple[str, ...]] = {}
    for position, arg in enumerate(mr.args, start=1):
        options = profile.lexicon.get(arg.token, [((arg.token,), 1.0)])
        chosen = options[prng.weighted_index([w for _, w in options])]
        surfaces[_slot_marker(position)] = chosen[0]
    words: list[str] = []
    for token in template:
        if token in surfaces:
            words.extend(surfaces[token])
        else:
            words.append(token)
    return words


def commentate(
    events: list[GameEvent], profile: CommentatorProfile
) -> tuple[tuple[Comment, ...], GoldMatch]:
    """Comment stream plus the gold matching that produced it.

    Gold entries are canonicalized through the same earliest-equal-MR rule the
    corpus loader applies at the default window, so writing and reloading a
    generated corpus reproduces the matching exactly.
    """
    _validate_templates(profile)
    prng = Prng(profile.seed)
    lag_lo, lag_hi = profile.lag_ms_range
    duration_ms = events[-1].time_ms + 1 if events else 1

    drafted: list[tuple[int, list[str], int | None]] = []
    for event in events:
        if prng.uniform() >= profile.comment_prob.get(event.mr.predicate.name, 0.0):
            continue
        lag = prng.uniform_int(lag_lo, lag_hi)
        templates = profile.lexicon[event.mr.predicate.name]
        template, _ = templates[prng.weighted_index([w for _, w in templates])]
        words = _realize(prng, profile, template, event.mr)
        drafted.append((event.time_ms + lag, words, event.id))

    n_normal = len(drafted)
    vocabulary = profile.superfluous_vocabulary
    for _ in range(n_normal):
        if prng.uniform() >= profile.superfluous_rate:
            continue
        if not vocabulary:
            raise EmptyLexicon("superfluous_rate > 0 needs a superfluous vocabulary")
        time_ms = int(prng.uniform() * duration_ms)
        length = prng.uniform_int(3, 7)
        words = [
            vocabulary[prng.uniform_int(0, len(vocabulary) - 1)] for _ in range(length)
        ]
        drafted.append((time_ms, words, None))

    drafted.sort(key=lambda item: item[0])
    by_id = {e.id: e for e in events}
    comments: list[Comment] = []
    matches: dict[int, int | None] = {}
    for comment_id, (time_ms, words, event_id) in enumerate(drafted):
        comments.append(
            make_comment(time_ms, " ".join(words), profile.language, comment_id)
        )
        if event_id is None:
            matches[comment_id] = None
        else:
            resolved = resolve_gold_event(
                events, time_ms, by_id[event_id].mr, DEFAULT_WINDOW_MS
            )
            matches[comment_id] = resolved.id if resolved is not None else event_id
    return tuple(comments), GoldMatch(matches)


def simulate_corpus(
    world: WorldConfig,
    profile: CommentatorProfile,
    games: int,
    name_prefix: str = "game",
) -> Corpus:
    """Generate `games` independent games with per-game derived seeds."""
    out = []
    for i in range(games):
        game_world = replace(world, seed=derive_seed(world.seed, i, 0))
        game_profile = replace(profile, seed=derive_seed(profile.seed, i, 1))
        events = simulate_events(game_world)
        comments, gold = commentate(events, game_profile)
        out.append(Game(f"{name_prefix}{i + 1}", tuple(events), comments, gold))
    return Corpus(tuple(out))


def default_world(seed: int = 0) -> WorldConfig:
    """Event mix weighted like the observed frequencies of the dominant event types."""
    # A 3500 ms mean gap yields ~2.3 candidates per comment under the 5 s
    # pairing window, the ambiguity regime the learners are designed for.
    return WorldConfig(
        duration_ms=600_000,
        mean_event_gap_ms=3500,
        event_type_weights={
            "ballstopped": 5817,
            "kick": 2122,
            "pass": 1069,
            "turnover": 566,
            "badPass": 371,
            "playmode": 240,
            "defense": 130,
            "steal": 160,
            "block": 90,
        },
        seed=seed,
    )


def default_profile(seed: int = 1) -> CommentatorProfile:
    return CommentatorProfile(
        comment_prob={
            "ballstopped": 1.72e-4,
            "kick": 0.033,
            "pass": 0.999,
            "turnover": 0.214,
            "badPass": 0.429,
            "playmode": 0.12,
            "defense": 0.35,
            "steal": 0.42,
            "block": 0.5,
        },
        lexicon={
            "playmode": [
                (("the", "play", "mode", "is", "now", "<1>"), 3.0),
                (("<1>", "is", "called"), 1.0),
            ],
            "ballstopped": [
                (("the", "ball", "has", "stopped"), 3.0),
                (("the", "ball", "is", "loose"), 1.0),
            ],
            "turnover": [
                (("<2>", "takes", "the", "ball", "away", "from", "<1>"), 3.0),
                (("<1>", "loses", "the", "ball", "to", "<2>"), 2.0),
            ],
            "kick": [
                (("<1>", "kicks", "the", "ball"), 3.0),
                (("a", "long", "kick", "by", "<1>"), 1.0),
            ],
            "pass": [
                (("<1>", "passes", "to", "<2>"), 3.0),
                (("<1>", "kicks", "the", "ball", "out", "to", "<2>"), 1.0),
            ],
            "badPass": [
                (("<1>", "makes", "a", "bad", "pass", "picked", "off", "by", "<2>"), 3.0),
                (("<1>", "gives", "the", "ball", "away", "to", "<2>"), 1.0),
            ],
            "defense": [
                (("<2>", "holds", "off", "the", "attack", "from", "<1>"), 2.0),
                (("<2>", "defends", "against", "<1>"), 1.0),
            ],
            "steal": [
                (("<1>", "steals", "the", "ball"), 3.0),
                (("what", "a", "steal", "by", "<1>"), 1.0),
            ],
            "block": [
                (("<1>", "blocks", "the", "shot"), 2.0),
                (("a", "big", "block", "by", "<1>"), 1.0),
            ],
        },
        superfluous_rate=0.22,
        lag_ms_range=(200, 4800),
        superfluous_vocabulary=(
            "what", "a", "great", "game", "folks", "the", "crowd", "is",
            "loving", "this", "an", "amazing", "day", "for", "soccer",
            "fans", "are", "cheering",
        ),
        seed=seed,
    )


@dataclass(frozen=True)
class SimulationSpec:
    world: WorldConfig
    profile: CommentatorProfile
    games: int = 4
    name_prefix: str = "game"


def parse_config(text: str) -> SimulationSpec:
    """Parse a `key = value` configuration; later lines override earlier ones.

    `template.<pred>` and `surface.<token>` lines accumulate; the first such
    line for a key replaces that key's default list.  Template and surface
    values are word sequences, optionally followed by `| weight`.
    """
    world = default_world()
    profile = default_profile()
    games = 4
    name_prefix = "game"

    weights = dict(world.event_type_weights)
    comment_prob = dict(profile.comment_prob)
    lexicon = {k: list(v) for k, v in profile.lexicon.items()}
    replaced_lexicon_keys: set[str] = set()
    world_fields: dict[str, int] = {}
    profile_fields: dict[str, object] = {}
    predicate_names = {p.name for p in mrl.PREDICATES}
    constant_tokens = {c.token for c in mrl.CONSTANTS}

    for lineno, line in enumerate(text.splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise ValueError(f"config line {lineno}: expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))

        if key == "seed":
            world_fields["seed"] = int(value)
        elif key == "duration_ms":
            world_fields["duration_ms"] = int(value)
        elif key == "mean_event_gap_ms":
            world_fields["mean_event_gap_ms"] = int(value)
        elif key.startswith("weight."):
            name = key[len("weight."):]
            if name not in predicate_names:
                raise ValueError(f"config line {lineno}: unknown predicate {name!r}")
            weights[name] = float(value)
        elif key == "commentator_seed":
            profile_fields["seed"] = int(value)
        elif key == "language":
            profile_fields["language"] = value
        elif key == "superfluous_rate":
            profile_fields["superfluous_rate"] = float(value)
        elif key == "lag_ms_min":
            lo, hi = profile_fields.get("lag_ms_range", profile.lag_ms_range)
            profile_fields["lag_ms_range"] = (int(value), hi)
        elif key == "lag_ms_max":
            lo, hi = profile_fields.get("lag_ms_range", profile.lag_ms_range)
            profile_fields["lag_ms_range"] = (lo, int(value))
        elif key == "superfluous_words":
            profile_fields["superfluous_vocabulary"] = tuple(value.split())
        elif key.startswith("comment_prob."):
            name = key[len("comment_prob."):]
            if name not in predicate_names:
                raise ValueError(f"config line {lineno}: unknown predicate {name!r}")
            comment_prob[name] = float(value)
        elif key.startswith("template.") or key.startswith("surface."):
            prefix, name = key.split(".", 1)
            valid = predicate_names if prefix == "template" else constant_tokens
            if name not in valid:
                raise ValueError(f"config line {lineno}: unknown {prefix} key {name!r}")
            words, weight = _parse_weighted_words(value, lineno)
            if name not in replaced_lexicon_keys:
                lexicon[name] = []
                replaced_lexicon_keys.add(name)
            lexicon[name].append((words, weight))
        elif key == "games":
            games = int(value)
        elif key == "name_prefix":
            name_prefix = value
        else:
            raise ValueError(f"config line {lineno}: unknown key {key!r}")

    world = replace(world, event_type_weights=weights, **world_fields)
    profile = replace(
        profile, comment_prob=comment_prob, lexicon=lexicon, **profile_fields
    )
    return SimulationSpec(world, profile, games, name_prefix)


def _parse_weighted_words(value: str, lineno: int) -> Template:
    if "|" in value:
        words_part, weight_part = value.rsplit("|", 1)
        try:
            weight = float(weight_part)
        except ValueError:
            raise ValueError(f"config line {lineno}: bad weight {weight_part!r}") from None
    else:
        words_part, weight = value, 1.0
    words = tuple(words_part.split())
    if not words:
        raise ValueError(f"config line {lineno}: empty phrase")
    return words, weight


def load_config(path: str | Path) -> SimulationSpec:
    return parse_config(Path(path).read_text(encoding="utf-8"))
