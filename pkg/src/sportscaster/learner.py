"""Disambiguation by retraining: turn ambiguous supervision into a model.

The shared loop: train on every (sentence, candidate) pair, then repeatedly
re-score each sentence's candidates with the current model, keep only the
best pair per sentence, and retrain from scratch, until the matching stops
moving.  Strategies differ solely in how a (sentence, MR) pair is scored:

  random       one-shot uniform candidate pick (lower baseline)
  parse_score  Model-1 parse likelihood of the pair
  nist_gen     NIST between the sentence and the MR's best generation
  meteor_gen   METEOR between the sentence and the MR's best generation
  nist_igsl    nist_gen times the IGSL probability of the MR's type
  meteor_igsl  meteor_gen times the IGSL probability of the MR's type
  gold         train straight on the gold matching (upper baseline)

superfluous_cv additionally prunes the lowest-scoring fraction of assigned
pairs each iteration, picking the fraction by internal cross-validation, so
sentences that describe nothing (superfluous commentary) stop polluting the
training set.
"""

from __future__ import annotations

import zlib
from dataclasses import dataclass, field
from typing import Mapping, Sequence

from . import metrics, mrl, strategic, translator
from .corpus import FormatError, GameExample
from .simgen import Prng

Key = tuple[str, int]
Pair = tuple[tuple[str, ...], mrl.MeaningRepresentation]

STRATEGY_KINDS = (
    "random",
    "parse_score",
    "nist_gen",
    "meteor_gen",
    "nist_igsl",
    "meteor_igsl",
    "gold",
)
_IGSL_KINDS = frozenset({"nist_igsl", "meteor_igsl"})
_GENERATION_KINDS = frozenset({"nist_gen", "meteor_gen", "nist_igsl", "meteor_igsl"})
DEFAULT_MAX_ITER = 10
VALIDATION_FRACTION = 0.2


class MissingStrategicModel(ValueError):
    pass


EmptyTrainingSet = translator.EmptyTrainingSet


@dataclass(frozen=True)
class ScoringStrategy:
    kind: str
    seed: int = 0

    def __post_init__(self):
        if self.kind not in STRATEGY_KINDS:
            raise ValueError(f"unknown strategy kind {self.kind!r}")


@dataclass
class Matching:
    """Comment key -> (assigned event id, score)."""

    assignments: dict[Key, tuple[int, float]] = field(default_factory=dict)

    def event_ids(self) -> dict[Key, int]:
        return {key: event_id for key, (event_id, _) in self.assignments.items()}

    def __eq__(self, other):
        if not isinstance(other, Matching):
            return NotImplemented
        return self.event_ids() == other.event_ids()


@dataclass
class IterationRecord:
    iteration: int
    changed: int
    matching_f1: float | None = None


@dataclass
class DisambiguationResult:
    matching: Matching
    model: translator.TranslationModel
    strategic: strategic.StrategicModel | None
    iterations_run: int
    history: list[IterationRecord] = field(default_factory=list)
    trained_on: frozenset[Key] = frozenset()


def initial_training_set(examples: Sequence[GameExample]) -> list[Pair]:
    """Every sentence with every candidate, sentence-major, candidates in
    time order."""
    if not examples:
        raise EmptyTrainingSet("no ambiguous examples")
    return [
        (ex.example.comment.tokens, candidate.mr)
        for ex in examples
        for candidate in ex.example.candidates
    ]


def evaluate_candidate(
    tokens: Sequence[str],
    mr: mrl.MeaningRepresentation,
    model: translator.TranslationModel,
    strategy: ScoringStrategy,
    strategic_model: strategic.StrategicModel | None = None,
    _generation_cache: dict | None = None,
) -> float:
    kind = strategy.kind
    if kind == "parse_score":
        return translator.score_pair(tokens, mr, model)
    if kind not in _GENERATION_KINDS:
        raise ValueError(f"strategy {kind!r} does not score candidates")
    if kind in _IGSL_KINDS and strategic_model is None:
        raise MissingStrategicModel(f"{kind} needs a strategic model")
    cache_key = mrl.serialize_mr(mr)
    if _generation_cache is not None and cache_key in _generation_cache:
        generated = _generation_cache[cache_key]
    else:
        try:
            generated = translator.generate_topk(mr, model, 1)[0][0]
        except translator.NoTemplate:
            generated = None
        if _generation_cache is not None:
            _generation_cache[cache_key] = generated
    if generated is None:
        return 0.0
    if kind.startswith("nist"):
        score = metrics.nist(list(tokens), list(generated))
    else:
        score = metrics.meteor(list(tokens), list(generated))
    if kind in _IGSL_KINDS:
        score *= strategic_model.probability(mr.predicate.name)
    return score


def _assign_best(
    examples: Sequence[GameExample],
    model: translator.TranslationModel,
    strategy: ScoringStrategy,
    strategic_model: strategic.StrategicModel | None,
) -> Matching:
    cache: dict = {}
    assignments: dict[Key, tuple[int, float]] = {}
    for ex in examples:
        tokens = ex.example.comment.tokens
        best = None
        for candidate in ex.example.candidates:
            score = evaluate_candidate(
                tokens, candidate.mr, model, strategy, strategic_model, cache
            )
            rank = (
                -score,
                candidate.time_ms,
                mrl.serialize_mr(candidate.mr),
                candidate.id,
            )
            if best is None or rank < best[0]:
                best = (rank, candidate, score)
        assignments[ex.key] = (best[1].id, best[2])
    return Matching(assignments)


def _pairs_from_matching(
    examples: Sequence[GameExample], matching: Matching, kept: frozenset[Key]
) -> list[Pair]:
    pairs = []
    for ex in examples:
        if ex.key not in kept:
            continue
        event_id, _ = matching.assignments[ex.key]
        event = next(c for c in ex.example.candidates if c.id == event_id)
        pairs.append((ex.example.comment.tokens, event.mr))
    return pairs


def _prune_keys(matching: Matching, prune_fraction: float) -> frozenset[Key]:
    """Keys that survive dropping pairs scoring below the fraction quantile."""
    if prune_fraction <= 0.0:
        return frozenset(matching.assignments)
    scores = sorted(score for _, score in matching.assignments.values())
    cut = scores[min(int(prune_fraction * len(scores)), len(scores) - 1)]
    return frozenset(
        key for key, (_, score) in matching.assignments.items() if score >= cut
    )


def _score_f1(
    matching: Matching, gold: Mapping[Key, int | None] | None
) -> float | None:
    if gold is None:
        return None
    return metrics.matching_f1(matching.event_ids(), gold).f1


def _random_matching(examples: Sequence[GameExample], seed: int) -> Matching:
    """One uniform draw per example, in pooled example order."""
    prng = Prng(seed)
    assignments = {}
    for ex in examples:
        candidates = ex.example.candidates
        pick = candidates[prng.uniform_int(0, len(candidates) - 1)]
        assignments[ex.key] = (pick.id, 1.0)
    return Matching(assignments)


def _gold_matching(
    examples: Sequence[GameExample], gold: Mapping[Key, int | None]
) -> Matching:
    assignments = {}
    for ex in examples:
        event_id = gold.get(ex.key)
        if event_id is None:
            continue
        if any(c.id == event_id for c in ex.example.candidates):
            assignments[ex.key] = (event_id, 1.0)
    return Matching(assignments)


def retrain_loop(
    examples: Sequence[GameExample],
    strategy: ScoringStrategy,
    max_iter: int = DEFAULT_MAX_ITER,
    *,
    total_count: Mapping[str, int] | None = None,
    gold: Mapping[Key, int | None] | None = None,
    initial_pairs: Sequence[Pair] | None = None,
    prune_fraction: float = 0.0,
    em_iterations: int = 25,
) -> DisambiguationResult:
    """The retraining disambiguation loop (see module docstring).

    gold serves two roles: the `gold` strategy trains on it directly, and for
    all strategies it fills the per-iteration F1 column of the history.
    """
    if not examples:
        raise EmptyTrainingSet("no ambiguous examples")

    if strategy.kind == "random":
        matching = _random_matching(examples, strategy.seed)
        kept = _prune_keys(matching, prune_fraction)
        model = translator.train(
            _pairs_from_matching(examples, matching, kept), em_iterations
        )
        record = IterationRecord(1, len(matching.assignments), _score_f1(matching, gold))
        return DisambiguationResult(
            matching, model, None, 1, [record], trained_on=kept
        )

    if strategy.kind == "gold":
        if gold is None:
            raise ValueError("gold strategy requires the gold matching")
        matching = _gold_matching(examples, gold)
        pairs = _pairs_from_matching(
            examples, matching, frozenset(matching.assignments)
        )
        if not pairs:
            raise EmptyTrainingSet("gold matching covers no example")
        model = translator.train(pairs, em_iterations)
        record = IterationRecord(1, len(matching.assignments), _score_f1(matching, gold))
        return DisambiguationResult(
            matching,
            model,
            None,
            1,
            [record],
            trained_on=frozenset(matching.assignments),
        )

    strategic_model = None
    if strategy.kind in _IGSL_KINDS:
        if total_count is None:
            raise MissingStrategicModel(
                f"{strategy.kind} needs per-predicate event totals"
            )

    pairs = (
        list(initial_pairs)
        if initial_pairs is not None
        else initial_training_set(examples)
    )
    if not pairs:
        raise EmptyTrainingSet("empty initial training pairs")
    model = translator.train(pairs, em_iterations)

    matching: Matching | None = None
    kept: frozenset[Key] = frozenset()
    history: list[IterationRecord] = []
    iterations = 0
    for iteration in range(1, max_iter + 1):
        if strategy.kind in _IGSL_KINDS:
            strategic_model = strategic.igsl(
                [ex.example for ex in examples], total_count
            )
        new_matching = _assign_best(examples, model, strategy, strategic_model)
        iterations = iteration
        if matching is None:
            changed = len(new_matching.assignments)
        else:
            previous = matching.event_ids()
            changed = sum(
                1
                for key, event_id in new_matching.event_ids().items()
                if previous.get(key) != event_id
            )
        history.append(
            IterationRecord(iteration, changed, _score_f1(new_matching, gold))
        )
        if matching is not None and new_matching == matching:
            break
        matching = new_matching
        kept = _prune_keys(matching, prune_fraction)
        model = translator.train(
            _pairs_from_matching(examples, matching, kept), em_iterations
        )
    return DisambiguationResult(
        matching, model, strategic_model, iterations, history, trained_on=kept
    )


def init_from_external(
    examples: Sequence[GameExample], path
) -> tuple[list[Pair], int]:
    """Externally disambiguated pairs for iteration 0, plus a warning count.

    File lines: `<game>\t<comment-id>\t<mr-surface>`.  Lines naming an
    unknown comment, or an MR that is not among the comment's candidates,
    are skipped and counted.  Later lines override earlier ones.
    """
    wanted: dict[Key, mrl.MeaningRepresentation] = {}
    warnings = 0
    with open(path, encoding="utf-8") as f:
        for number, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line:
                continue
            fields = line.split("\t")
            if len(fields) != 3:
                raise FormatError(str(path), number, "expected 3 tab-separated fields")
            game, comment_id, surface = fields
            try:
                key: Key = (game, int(comment_id))
                wanted[key] = mrl.parse_mr(surface)
            except (ValueError, mrl.MalformedMR) as err:
                raise FormatError(str(path), number, str(err)) from err
    by_key = {ex.key: ex.example for ex in examples}
    pairs: list[Pair] = []
    for key, mr in wanted.items():
        example = by_key.get(key)
        if example is None or all(c.mr != mr for c in example.candidates):
            warnings += 1
            continue
        pairs.append((example.comment.tokens, mr))
    return pairs, warnings


def validation_split(examples: Sequence[GameExample]) -> tuple[list[GameExample], list[GameExample]]:
    """Deterministic 80/20 split keyed on a hash of (game, comment id)."""
    train: list[GameExample] = []
    validation: list[GameExample] = []
    for ex in examples:
        game, comment_id = ex.key
        seed = (zlib.crc32(game.encode("utf-8")) << 32) ^ comment_id
        if Prng(seed).uniform() < VALIDATION_FRACTION:
            validation.append(ex)
        else:
            train.append(ex)
    return train, validation


def _validation_score(
    model: translator.TranslationModel, examples: Sequence[GameExample]
) -> float:
    """Fraction of sentences the model parses into one of their candidates.

    The parse runs over the full MR space: a model fooled by superfluous
    vocabulary either abstains or wanders outside the candidate set, and
    both count against it.  The word-level scorer gives argument
    permutations of one predicate identical scores, so the parse here is
    the whole argmax tie set, not one arbitrarily tie-broken MR; a tie set
    that reaches a candidate counts as parsing into the candidate set.
    """
    if not examples:
        return 0.0
    good = 0
    for ex in examples:
        ranked = translator.parse_sentence(ex.example.comment.tokens, model)
        if not ranked:
            continue
        # 1e-12 relative slack: permuted derivations sum in different orders
        cutoff = ranked[0][1] * (1.0 - 1e-12)
        tied = set()
        for mr, score in ranked:
            if score < cutoff:
                break
            tied.add(mrl.serialize_mr(mr))
        if any(mrl.serialize_mr(c.mr) in tied for c in ex.example.candidates):
            good += 1
    return good / len(examples)


def superfluous_cv(
    examples: Sequence[GameExample],
    thresholds: Sequence[float],
    strategy: ScoringStrategy,
    *,
    total_count: Mapping[str, int] | None = None,
    gold: Mapping[Key, int | None] | None = None,
    max_iter: int = DEFAULT_MAX_ITER,
    em_iterations: int = 25,
) -> tuple[float, Matching, DisambiguationResult]:
    """Choose a pruning fraction by internal CV, then retrain on everything.

    Returns (best threshold, the final matching restricted to pairs that
    survived pruning, the full-run result whose matching still covers every
    sentence).
    """
    if not thresholds:
        raise ValueError("need at least one threshold")
    if not examples:
        raise EmptyTrainingSet("no ambiguous examples")
    train, validation = validation_split(examples)
    best_theta = None
    best_score = -1.0
    for theta in sorted(thresholds):
        result = retrain_loop(
            train,
            strategy,
            max_iter,
            total_count=total_count,
            gold=None,
            prune_fraction=theta,
            em_iterations=em_iterations,
        )
        score = _validation_score(result.model, validation)
        if score > best_score:
            best_theta, best_score = theta, score
    final = retrain_loop(
        examples,
        strategy,
        max_iter,
        total_count=total_count,
        gold=gold,
        prune_fraction=best_theta,
        em_iterations=em_iterations,
    )
    filtered = Matching(
        {
            key: value
            for key, value in final.matching.assignments.items()
            if key in final.trained_on
        }
    )
    return best_theta, filtered, final


def report_lines(result: DisambiguationResult) -> str:
    """Per-iteration `iter  matching_f1  changed` TSV block."""
    lines = []
    for record in result.history:
        f1 = "-" if record.matching_f1 is None else f"{record.matching_f1:.12g}"
        lines.append(f"{record.iteration}\t{f1}\t{record.changed}")
    return "".join(line + "\n" for line in lines)
