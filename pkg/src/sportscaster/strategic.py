"""Strategic generation: which event types are worth talking about.

Two estimators produce a per-predicate probability of being commented on:
estimate_from_matching counts matched events directly from a disambiguated
matching, while igsl needs no matching at all: it distributes each
sentence's single match over its candidate event types in proportion to the
current probabilities and iterates to a fixed point (synchronous updates,
min(.,1) clamp).

select_event and assemble_sportscast turn a strategic model into an actual
transcript: stage 1 picks among co-occurring events by normalized
probability, stage 2 keeps the pick with its own probability, and the
tactical generator verbalizes it.
"""

from __future__ import annotations

from collections import Counter, defaultdict
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from . import mrl, translator
from .corpus import AmbiguousExample, GameEvent
from .simgen import Prng

DEFAULT_MAX_ITER = 50
_TOLERANCE = 1e-9
TICK_MS = 1000


class EmptyCandidates(ValueError):
    pass


@dataclass
class StrategicModel:
    prob: dict[str, float]
    total_count: dict[str, int] = field(default_factory=dict)

    def probability(self, predicate: str) -> float:
        return self.prob.get(predicate, 0.0)


def count_event_types(events: Iterable[GameEvent]) -> dict[str, int]:
    counts: Counter = Counter(e.mr.predicate.name for e in events)
    return dict(counts)


def estimate_from_matching(
    matched_events: Iterable[tuple[str, GameEvent]],
    events: Iterable[tuple[str, GameEvent]],
) -> StrategicModel:
    """Fraction of events of each type matched to at least one sentence.

    Both arguments carry (game name, event) so multi-game traces keep their
    events distinct; an event matched by several sentences counts once.
    """
    total: Counter = Counter(event.mr.predicate.name for _, event in events)
    unique: dict[tuple[str, int], str] = {}
    for game, event in matched_events:
        unique[(game, event.id)] = event.mr.predicate.name
    matched_counts: Counter = Counter(unique.values())
    prob = {
        predicate: (matched_counts[predicate] / count if count else 0.0)
        for predicate, count in total.items()
    }
    for predicate in matched_counts:
        prob.setdefault(predicate, 0.0)  # matched but absent from trace: 0/0
    return StrategicModel(prob=prob, total_count=dict(total))


def igsl_match_shares(
    candidate_predicates: Sequence[str], prob: Mapping[str, float]
) -> dict[str, float]:
    """One sentence's match probability split over its candidate types.

    share(type) = multiplicity(type) * Pr(type) / sum of Pr over candidates;
    a zero denominator contributes nothing.  Scale-invariant: multiplying
    every Pr by a common positive factor leaves all shares unchanged.
    """
    weights = Counter(candidate_predicates)
    denominator = sum(prob.get(p, 0.0) * n for p, n in weights.items())
    if denominator <= 0.0:
        return {p: 0.0 for p in weights}
    return {
        p: prob.get(p, 0.0) * n / denominator for p, n in sorted(weights.items())
    }


def igsl(
    examples: Sequence[AmbiguousExample],
    total_count: Mapping[str, int],
    max_iter: int = DEFAULT_MAX_ITER,
) -> StrategicModel:
    """Iterative strategy learning over ambiguous examples.

    All probabilities start at 1, so the first iteration hands each sentence's
    match out inversely proportional to its ambiguity; updates are synchronous
    (every share in an iteration uses the previous iteration's probabilities).
    """
    sentences: list[Counter] = []
    for example in examples:
        if not example.candidates:
            raise EmptyCandidates(
                f"comment {example.comment.id} has no candidate events"
            )
        sentences.append(Counter(e.mr.predicate.name for e in example.candidates))
    predicates = sorted(
        {p for weights in sentences for p in weights} | set(total_count)
    )
    prob = {p: 1.0 for p in predicates}
    for _ in range(max_iter):
        match_count: defaultdict[str, float] = defaultdict(float)
        for weights in sentences:
            denominator = sum(prob[p] * n for p, n in weights.items())
            if denominator <= 0.0:
                continue
            for p, n in weights.items():
                match_count[p] += prob[p] * n / denominator
        updated = {}
        for p in predicates:
            count = total_count.get(p, 0)
            updated[p] = min(match_count[p] / count, 1.0) if count else 0.0
        delta = max(abs(updated[p] - prob[p]) for p in predicates)
        prob = updated
        if delta < _TOLERANCE:
            break
    return StrategicModel(prob=prob, total_count=dict(total_count))


def select_event(
    events: Sequence[GameEvent], model: StrategicModel, prng: Prng
) -> GameEvent | None:
    """Two-stage stochastic pick: normalized choice, then a keep/drop coin.

    Draw order: one uniform for stage 1 (skipped when the normalizer is 0),
    one uniform for stage 2.
    """
    if not events:
        raise EmptyCandidates("no co-occurring events to select from")
    weights = [model.probability(e.mr.predicate.name) for e in events]
    normalizer = sum(weights)
    if normalizer <= 0.0:
        return None
    pick = prng.weighted_index(weights)
    if prng.uniform() < weights[pick]:
        return events[pick]
    return None


def assemble_sportscast(
    events: Sequence[GameEvent],
    model: StrategicModel,
    translation: translator.TranslationModel,
    k: int = 5,
    prng: Prng | None = None,
    tick_ms: int = TICK_MS,
) -> tuple[list[tuple[int, mrl.MeaningRepresentation, tuple[str, ...]]], list[str]]:
    """Walk the timeline in ticks, verbalizing stochastically chosen events.

    Returns (transcript, skipped): transcript entries are (tick time, MR,
    sentence); skipped collects the predicates that had no learned template,
    one entry per skipped event.
    """
    if k < 1:
        raise ValueError("k must be >= 1")
    prng = prng if prng is not None else Prng(0)
    transcript = []
    skipped: list[str] = []
    by_tick: dict[int, list[GameEvent]] = defaultdict(list)
    for event in events:
        by_tick[event.time_ms // tick_ms].append(event)
    for tick in sorted(by_tick):
        chosen = select_event(by_tick[tick], model, prng)
        if chosen is None:
            continue
        try:
            candidates = translator.generate_topk(chosen.mr, translation, k)
        except translator.NoTemplate:
            skipped.append(chosen.mr.predicate.name)
            continue
        scores = [score for _, score in candidates]
        if sum(scores) > 0.0:
            sentence = candidates[prng.weighted_index(scores)][0]
        else:
            sentence = candidates[0][0]
        transcript.append((tick * tick_ms, chosen.mr, sentence))
    return transcript, skipped


def save_strategic(model: StrategicModel, path) -> None:
    grammar_order = [p.name for p in mrl.PREDICATES if p.name in model.prob]
    extras = sorted(set(model.prob) - set(grammar_order))
    lines = [
        f"{predicate}\t{model.prob[predicate]:.12g}\t{model.total_count.get(predicate, 0)}"
        for predicate in grammar_order + extras
    ]
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("".join(line + "\n" for line in lines))


def load_strategic(path) -> StrategicModel:
    prob: dict[str, float] = {}
    total: dict[str, int] = {}
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            predicate, p, count = line.split("\t")
            prob[predicate] = float(p)
            total[predicate] = int(count)
    return StrategicModel(prob=prob, total_count=total)
