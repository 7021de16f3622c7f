"""Tactical translation between sentences and meaning representations.

The model is a bundle of three independently trained parts:

  * AlignmentModel: IBM-Model-1 word/production translation table, trained
    by EM over (sentence, MR) pairs.  Words align to the productions of the
    MR's derivation plus a NULL production that absorbs function words.
  * TemplateLexicon: per-predicate sentence templates with numbered argument
    slots, plus per-constant surface realizations, both read off the trained
    alignment by argmax assignment.
  * LanguageModel: an add-k trigram model over the training sentences.

Parsing ranks candidate MRs by the per-token-normalized Model-1 likelihood;
generation instantiates templates and ranks by the noisy-channel product
(LM probability times template and realization weights).

Scoring is implemented once, vectorized over candidates; score_pair is the
single-candidate view of the same arithmetic, so restricted and full-space
rankings can never disagree.
"""

from __future__ import annotations

import itertools
import math
import re
from collections import Counter, defaultdict
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Iterable, Sequence

import numpy as np

from . import mrl

Tokens = Sequence[str]
Pair = tuple[Tokens, mrl.MeaningRepresentation]

NULL_KEY = "<NULL>"
SMOOTHING_K = 1e-3
LM_ORDER = 3
LM_K = 0.01
_START = "<s>"
_END = "</s>"

# Fixed column layout for vectorized scoring: 46 grammar productions, NULL,
# and a zero pad column so every derivation indexes exactly 4 columns.
_COLUMN_KEYS = tuple(p.key for p in mrl.PRODUCTIONS) + (NULL_KEY,)
_COLUMN_INDEX = {key: i for i, key in enumerate(_COLUMN_KEYS)}
_PAD_COLUMN = len(_COLUMN_KEYS)

_SLOT_RE = re.compile(r"<(\d+)>\Z")


class EmptyTrainingSet(ValueError):
    pass


class NoTemplate(LookupError):
    def __init__(self, predicate: str):
        super().__init__(f"no template learned for predicate {predicate!r}")
        self.predicate = predicate


@dataclass
class AlignmentModel:
    """Word translation table t[production key][word], one dist per key."""

    t: dict[str, dict[str, float]]
    vocabulary: tuple[str, ...]
    log_likelihoods: tuple[float, ...] = ()


@dataclass
class TemplateLexicon:
    # predicate name -> template (tokens and "<i>" slot markers) -> weight
    templates: dict[str, dict[tuple[str, ...], float]]
    # constant token -> surface realization tokens -> weight
    realizations: dict[str, dict[tuple[str, ...], float]]


@dataclass
class LanguageModel:
    counts: dict[tuple[str, str], Counter] = field(default_factory=dict)
    vocabulary: frozenset[str] = frozenset()

    def fit(self, sentences: Iterable[Tokens]) -> "LanguageModel":
        words: set[str] = set()
        for sentence in sentences:
            words.update(sentence)
            padded = [_START] * (LM_ORDER - 1) + list(sentence) + [_END]
            for i in range(LM_ORDER - 1, len(padded)):
                context = tuple(padded[i - LM_ORDER + 1 : i])
                self.counts.setdefault(context, Counter())[padded[i]] += 1
        self.vocabulary = frozenset(words)
        return self

    def probability(self, word: str, context: tuple[str, str]) -> float:
        bucket = self.counts.get(context)
        seen = bucket[word] if bucket else 0
        total = sum(bucket.values()) if bucket else 0
        return (seen + LM_K) / (total + LM_K * (len(self.vocabulary) + 1))

    def sentence_logprob(self, tokens: Tokens) -> float:
        padded = [_START] * (LM_ORDER - 1) + list(tokens) + [_END]
        return sum(
            math.log(self.probability(padded[i], tuple(padded[i - 2 : i])))
            for i in range(LM_ORDER - 1, len(padded))
        )

    def sentence_prob(self, tokens: Tokens) -> float:
        return math.exp(self.sentence_logprob(tokens))


@dataclass
class TranslationModel:
    alignment: AlignmentModel
    lexicon: TemplateLexicon
    lm: LanguageModel


def _derivation_keys(mr: mrl.MeaningRepresentation) -> list[str]:
    return [p.key for p in mrl.derivation(mr)]


def _corpus_log_likelihood(
    prepared: list[tuple[Tokens, list[str]]], t: dict[str, dict[str, float]]
) -> float:
    total = 0.0
    for tokens, keys in prepared:
        width = len(keys)
        for word in tokens:
            total += math.log(
                sum(t[key].get(word, 0.0) for key in keys) / width
            )
    return total


def train_alignment(pairs: Sequence[Pair], iterations: int = 25) -> AlignmentModel:
    """Model-1 EM: uniform init, then expected-count renormalization."""
    if not pairs:
        raise EmptyTrainingSet("no (sentence, mr) pairs to align")
    if iterations < 1:
        raise ValueError("iterations must be >= 1")
    prepared = [
        (tuple(tokens), _derivation_keys(mr) + [NULL_KEY]) for tokens, mr in pairs
    ]
    vocabulary = tuple(sorted({w for tokens, _ in prepared for w in tokens}))
    if not vocabulary:
        raise EmptyTrainingSet("training pairs contain no words")
    uniform = 1.0 / len(vocabulary)
    keys = sorted({key for _, ks in prepared for key in ks})
    t = {key: dict.fromkeys(vocabulary, uniform) for key in keys}
    history = [_corpus_log_likelihood(prepared, t)]
    for _ in range(iterations):
        expected: dict[str, defaultdict[str, float]] = {
            key: defaultdict(float) for key in keys
        }
        for tokens, ks in prepared:
            for word in tokens:
                denom = sum(t[key].get(word, 0.0) for key in ks)
                for key in ks:
                    expected[key][word] += t[key].get(word, 0.0) / denom
        for key in keys:
            total = sum(expected[key].values())
            t[key] = {word: c / total for word, c in sorted(expected[key].items())}
        history.append(_corpus_log_likelihood(prepared, t))
    return AlignmentModel(t=t, vocabulary=vocabulary, log_likelihoods=tuple(history))


def extract_templates(pairs: Sequence[Pair], alignment: AlignmentModel) -> TemplateLexicon:
    """Argmax-assign each token to a production, then cut out constant runs.

    A maximal contiguous run of tokens owned by one constant production is
    recorded as that constant's surface realization.  Runs are matched to
    argument positions in order (so pass(pink1,pink1) consumes its two slots
    left to right); a run with no remaining slot stays in the template as
    literal text.  Templates missing any argument slot are discarded: they
    cannot generate the full MR.
    """
    template_counts: dict[str, Counter] = defaultdict(Counter)
    realization_counts: dict[str, Counter] = defaultdict(Counter)
    for tokens, mr in pairs:
        tokens = tuple(tokens)
        deriv = mrl.derivation(mr)
        # Ties favor argument productions (in argument order) over the head,
        # and NULL never wins a tie: a fully symmetric table, as on a
        # single-pair corpus, must still yield a slotted, usable template.
        keys = [p.key for p in deriv[1:]] + [deriv[0].key, NULL_KEY]
        assigned = []
        for word in tokens:
            best_key, best = NULL_KEY, -1.0
            for key in keys:
                value = alignment.t.get(key, {}).get(word, 0.0)
                if value > best:
                    best_key, best = key, value
            assigned.append(best_key)
        # Argument positions still wanting a slot, queued per constant key.
        open_slots: dict[str, list[int]] = defaultdict(list)
        for position, production in enumerate(deriv[1:], start=1):
            open_slots[production.key].append(position)
        items: list[str] = []
        filled = 0
        i = 0
        while i < len(tokens):
            key = assigned[i]
            if key in open_slots:
                j = i
                while j < len(tokens) and assigned[j] == key:
                    j += 1
                realization_counts[key][tokens[i:j]] += 1
                if open_slots[key]:
                    items.append(f"<{open_slots[key].pop(0)}>")
                    filled += 1
                else:
                    items.extend(tokens[i:j])
                i = j
            else:
                items.append(tokens[i])
                i += 1
        if filled == mr.predicate.arity:
            template_counts[mr.predicate.name][tuple(items)] += 1

    def normalize(counts: Counter) -> dict:
        total = sum(counts.values())
        return {item: c / total for item, c in sorted(counts.items())}

    return TemplateLexicon(
        templates={k: normalize(c) for k, c in sorted(template_counts.items())},
        realizations={k: normalize(c) for k, c in sorted(realization_counts.items())},
    )


def train(pairs: Sequence[Pair], iterations: int = 25) -> TranslationModel:
    """Alignment EM, template extraction, and LM fit in one call."""
    if not pairs:
        raise EmptyTrainingSet("no (sentence, mr) pairs to train on")
    alignment = train_alignment(pairs, iterations)
    lexicon = extract_templates(pairs, alignment)
    lm = LanguageModel().fit([tokens for tokens, _ in pairs])
    return TranslationModel(alignment=alignment, lexicon=lexicon, lm=lm)


def null_floor(model: TranslationModel) -> float:
    """Per-word score of a sentence with no vocabulary overlap at all."""
    size = len(model.alignment.vocabulary)
    return SMOOTHING_K / (1.0 + SMOOTHING_K * size)


def _candidate_arrays(
    mrs: Sequence[mrl.MeaningRepresentation],
) -> tuple[np.ndarray, np.ndarray]:
    index = np.full((len(mrs), 4), _PAD_COLUMN, dtype=np.intp)
    widths = np.empty(len(mrs), dtype=np.float64)
    for row, mr in enumerate(mrs):
        keys = _derivation_keys(mr) + [NULL_KEY]
        for col, key in enumerate(keys):
            index[row, col] = _COLUMN_INDEX[key]
        widths[row] = len(keys)
    return index, widths


@lru_cache(maxsize=1)
def _full_space_arrays() -> tuple[np.ndarray, np.ndarray]:
    return _candidate_arrays(mrl.enumerate_mrs())


def _smoothed_table(tokens: Tokens, model: TranslationModel) -> np.ndarray:
    """(word, production column) add-k translation probabilities, pad col 0."""
    t = model.alignment.t
    denominator = 1.0 + SMOOTHING_K * len(model.alignment.vocabulary)
    table = np.zeros((len(tokens), _PAD_COLUMN + 1), dtype=np.float64)
    for wi, word in enumerate(tokens):
        for ci, key in enumerate(_COLUMN_KEYS):
            raw = t.get(key, {}).get(word, 0.0)
            table[wi, ci] = (raw + SMOOTHING_K) / denominator
    return table


def score_candidates(
    tokens: Tokens,
    mrs: Sequence[mrl.MeaningRepresentation],
    model: TranslationModel,
) -> list[float]:
    """Per-token-normalized Model-1 likelihood of the sentence for each MR."""
    if not mrs:
        return []
    if not tokens:
        return [null_floor(model)] * len(mrs)
    if mrs is mrl.enumerate_mrs():
        index, widths = _full_space_arrays()
    else:
        index, widths = _candidate_arrays(mrs)
    table = _smoothed_table(tokens, model)
    # (words, mrs): sum production columns in derivation order, NULL, pads.
    per_word = table[:, index].sum(axis=2) / widths
    scores = per_word.prod(axis=0) ** (1.0 / len(tokens))
    return scores.tolist()


def score_pair(
    tokens: Tokens, mr: mrl.MeaningRepresentation, model: TranslationModel
) -> float:
    return score_candidates(tokens, (mr,), model)[0]


def parse_sentence(
    tokens: Tokens,
    model: TranslationModel,
    candidates: Sequence[mrl.MeaningRepresentation] | None = None,
) -> list[tuple[mrl.MeaningRepresentation, float]]:
    """Rank candidate MRs (the full space when none are given), or abstain.

    Abstention: an empty result whenever even the best candidate scores at
    the all-NULL floor, i.e. the sentence shares nothing with the model.
    """
    mrs = mrl.enumerate_mrs() if candidates is None else tuple(candidates)
    if not mrs:
        return []
    scores = score_candidates(tokens, mrs, model)
    if max(scores) <= null_floor(model) * (1.0 + 1e-9):
        return []
    order = sorted(range(len(mrs)), key=lambda i: (-scores[i], mrl.serialize_mr(mrs[i])))
    return [(mrs[i], scores[i]) for i in order]


def _slot_positions(template: tuple[str, ...]) -> list[int]:
    positions = []
    for item in template:
        match = _SLOT_RE.match(item)
        if match:
            positions.append(int(match.group(1)))
    return positions


def generate_topk(
    mr: mrl.MeaningRepresentation, model: TranslationModel, k: int = 5
) -> list[tuple[tuple[str, ...], float]]:
    """Noisy-channel generation: all template/realization combos, best k."""
    if k < 1:
        raise ValueError("k must be >= 1")
    templates = model.lexicon.templates.get(mr.predicate.name)
    if not templates:
        raise NoTemplate(mr.predicate.name)
    scored: list[tuple[tuple[str, ...], float]] = []
    for template, template_weight in sorted(templates.items()):
        slots = _slot_positions(template)
        choices = []
        for position in slots:
            constant = mr.args[position - 1].token
            realizations = model.lexicon.realizations.get(constant)
            if not realizations:
                realizations = {(constant,): 1.0}  # unseen constant: its own token
            choices.append(sorted(realizations.items()))
        for combo in itertools.product(*choices):
            by_position = dict(zip(slots, combo))
            realized: list[str] = []
            for item in template:
                match = _SLOT_RE.match(item)
                if match:
                    realized.extend(by_position[int(match.group(1))][0])
                else:
                    realized.append(item)
            weight = template_weight
            for _, realization_weight in combo:
                weight *= realization_weight
            score = model.lm.sentence_prob(realized) * weight
            scored.append((tuple(realized), score))
    scored.sort(key=lambda item: (-item[1], item[0]))
    return scored[:k]


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def save_model(model: TranslationModel, path) -> None:
    lines = ["[alignment]"]
    for key in sorted(model.alignment.t):
        for word, prob in sorted(model.alignment.t[key].items()):
            if prob > 0.0:
                lines.append(f"{key}\t{word}\t{_fmt(prob)}")
    lines.append("[templates]")
    for predicate in sorted(model.lexicon.templates):
        for template, weight in sorted(model.lexicon.templates[predicate].items()):
            lines.append(f"S\t{predicate}\t{_fmt(weight)}\t{' '.join(template)}")
    for constant in sorted(model.lexicon.realizations):
        for tokens, weight in sorted(model.lexicon.realizations[constant].items()):
            lines.append(f"C\t{constant}\t{_fmt(weight)}\t{' '.join(tokens)}")
    lines.append("[lm]")
    for context in sorted(model.lm.counts):
        for word, count in sorted(model.lm.counts[context].items()):
            lines.append(f"{' '.join(context)}\t{word}\t{count}")
    with open(path, "w", encoding="utf-8", newline="\n") as f:
        f.write("".join(line + "\n" for line in lines))


def load_model(path) -> TranslationModel:
    """Inverse of save_model (alignment LL history is not persisted)."""
    t: dict[str, dict[str, float]] = {}
    templates: dict[str, dict[tuple[str, ...], float]] = {}
    realizations: dict[str, dict[tuple[str, ...], float]] = {}
    counts: dict[tuple[str, str], Counter] = {}
    section = None
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.rstrip("\n")
            if not line:
                continue
            if line.startswith("[") and line.endswith("]"):
                section = line[1:-1]
                continue
            fields = line.split("\t")
            if section == "alignment":
                key, word, prob = fields
                t.setdefault(key, {})[word] = float(prob)
            elif section == "templates":
                kind, name, weight, body = fields
                items = tuple(body.split(" "))
                if kind == "S":
                    templates.setdefault(name, {})[items] = float(weight)
                else:
                    realizations.setdefault(name, {})[items] = float(weight)
            elif section == "lm":
                context, word, count = fields
                bucket = counts.setdefault(tuple(context.split(" ")), Counter())
                bucket[word] = int(count)
            else:
                raise ValueError(f"line outside any section in {path}")
    vocabulary = tuple(sorted({word for dist in t.values() for word in dist}))
    lm_words = {word for bucket in counts.values() for word in bucket}
    lm = LanguageModel(counts=counts, vocabulary=frozenset(lm_words - {_END}))
    return TranslationModel(
        alignment=AlignmentModel(t=t, vocabulary=vocabulary),
        lexicon=TemplateLexicon(templates=templates, realizations=realizations),
        lm=lm,
    )
