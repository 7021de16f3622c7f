"""Evaluation: matching/parsing F1, document BLEU, additive NIST, METEOR.

The n-gram metrics are self-contained implementations of the exact variants
used by the learning loops and reports:

  * BLEU is corpus-level only (clipped counts pooled over all segments before
    the geometric mean), never sentence-level, with the standard brevity
    penalty against the closest-length reference.
  * NIST is the additive n-gram precision sum with uniform information
    weights and the quadratic-log brevity factor pinned to 0.5 at a 2/3
    length ratio.  Unlike BLEU it rewards partial matches, so two sentences
    sharing any unigram score above zero.
  * METEOR uses exact unigram alignment (most matches, then fewest chunks),
    recall-weighted harmonic mean 10PR/(R+9P), and the 0.5*(chunks/matches)^3
    fragmentation penalty.
"""

from __future__ import annotations

import json
import math
from collections import Counter
from dataclasses import dataclass, field
from typing import Hashable, Iterable, Mapping, Sequence

from . import mrl
from .corpus import Game

Tokens = Sequence[str]

# Brevity exponent: exp(beta * ln^2(2/3)) = 0.5.
_NIST_BETA = math.log(0.5) / math.log(2 / 3) ** 2


class EmptyReferences(ValueError):
    pass


@dataclass
class EvalReport:
    task: str
    precision: float | None = None
    recall: float | None = None
    f1: float | None = None
    bleu: float | None = None
    nist: float | None = None
    counts: dict[str, int] = field(default_factory=dict)
    breakdown: dict[str, dict[str, float]] = field(default_factory=dict)


def f1_score(precision: float, recall: float) -> float:
    if precision + recall <= 0:
        return 0.0
    return 2 * precision * recall / (precision + recall)


def _prf(correct: int, predicted: int, gold_total: int) -> tuple[float, float, float]:
    p = correct / predicted if predicted else 0.0
    r = correct / gold_total if gold_total else 0.0
    return p, r, f1_score(p, r)


def matching_f1(
    predicted: Mapping[Hashable, int],
    gold: Mapping[Hashable, int | None],
) -> EvalReport:
    """Score a comment-to-event assignment against the gold matching."""
    gold_bearing = {k for k, v in gold.items() if v is not None}
    correct = sum(1 for k, e in predicted.items() if gold.get(k) == e)
    p, r, f = _prf(correct, len(predicted), len(gold_bearing))
    report = EvalReport(
        task="matching",
        precision=p,
        recall=r,
        f1=f,
        counts={
            "correct": correct,
            "predicted": len(predicted),
            "gold": len(gold_bearing),
        },
    )
    games = {k[0] for k in predicted if isinstance(k, tuple) and len(k) == 2}
    if games and all(isinstance(k, tuple) and len(k) == 2 for k in gold):
        for game in sorted(games):
            sub_pred = {k: v for k, v in predicted.items() if k[0] == game}
            sub_gold = {k: v for k, v in gold.items() if k[0] == game}
            c = sum(1 for k, e in sub_pred.items() if sub_gold.get(k) == e)
            gp, gr, gf = _prf(
                c, len(sub_pred), sum(1 for v in sub_gold.values() if v is not None)
            )
            report.breakdown[game] = {"precision": gp, "recall": gr, "f1": gf}
    return report


def parsing_f1(
    parses: Mapping[Hashable, mrl.MeaningRepresentation | None],
    gold_mrs: Mapping[Hashable, mrl.MeaningRepresentation],
) -> EvalReport:
    """Exact-match parse accuracy over gold-bearing comments.

    Precision counts only emitted (non-abstaining) parses; recall counts all
    gold-bearing comments, so abstentions cost recall but not precision.
    """
    emitted = {k: v for k, v in parses.items() if k in gold_mrs and v is not None}
    correct = sum(1 for k, v in emitted.items() if v == gold_mrs[k])
    p, r, f = _prf(correct, len(emitted), len(gold_mrs))
    return EvalReport(
        task="parsing",
        precision=p,
        recall=r,
        f1=f,
        counts={"correct": correct, "emitted": len(emitted), "gold": len(gold_mrs)},
    )


def _ngram_counts(tokens: Tokens, n: int) -> Counter:
    return Counter(tuple(tokens[i : i + n]) for i in range(len(tokens) - n + 1))


def bleu_document(
    segments: Iterable[tuple[Tokens, Sequence[Tokens]]],
    max_n: int = 4,
) -> float:
    """Corpus BLEU over (candidate, references) segments pooled as one document."""
    matched = [0] * max_n
    total = [0] * max_n
    candidate_len = 0
    reference_len = 0
    for candidate, references in segments:
        references = list(references)
        if not references:
            raise EmptyReferences("segment has no reference sentences")
        candidate_len += len(candidate)
        # Closest reference length; ties prefer the shorter reference.
        reference_len += min(
            (abs(len(r) - len(candidate)), len(r)) for r in references
        )[1]
        for n in range(1, max_n + 1):
            cand_counts = _ngram_counts(candidate, n)
            if not cand_counts:
                continue
            clip: Counter = Counter()
            for r in references:
                ref_counts = _ngram_counts(r, n)
                for gram, count in ref_counts.items():
                    clip[gram] = max(clip[gram], count)
            total[n - 1] += sum(cand_counts.values())
            matched[n - 1] += sum(
                min(count, clip[gram]) for gram, count in cand_counts.items()
            )
    if candidate_len == 0 or any(m == 0 for m in matched) or any(t == 0 for t in total):
        return 0.0
    log_precision = sum(math.log(m / t) for m, t in zip(matched, total)) / max_n
    brevity = math.exp(min(0.0, 1.0 - reference_len / candidate_len))
    return brevity * math.exp(log_precision)


def nist(candidate: Tokens, reference: Tokens, max_n: int = 5) -> float:
    """Additive n-gram precision with uniform weights and quadratic-log brevity."""
    if not candidate or not reference:
        raise ValueError("candidate and reference must be nonempty")
    score = 0.0
    for n in range(1, max_n + 1):
        cand_counts = _ngram_counts(candidate, n)
        n_cand = sum(cand_counts.values())
        if n_cand == 0:
            continue
        ref_counts = _ngram_counts(reference, n)
        matched = sum(min(c, ref_counts[g]) for g, c in cand_counts.items())
        score += matched / n_cand
    ratio = min(1.0, len(candidate) / len(reference))
    return score * math.exp(_NIST_BETA * math.log(ratio) ** 2)


def _meteor_alignment(candidate: Tokens, reference: Tokens) -> tuple[int, int]:
    """(matches, chunks) of the alignment with most matches, then fewest chunks."""
    ref_positions: dict[str, list[int]] = {}
    for j, word in enumerate(reference):
        ref_positions.setdefault(word, []).append(j)

    memo: dict[tuple[int, int, frozenset[int]], tuple[int, int]] = {}

    def best(i: int, prev_ref: int, used: frozenset[int]) -> tuple[int, int]:
        if i == len(candidate):
            return (0, 0)
        key = (i, prev_ref, used)
        if key in memo:
            return memo[key]
        # Skip this candidate token.
        matches, neg_chunks = best(i + 1, -2, used)
        value = (matches, neg_chunks)
        for j in ref_positions.get(candidate[i], ()):
            if j in used:
                continue
            sub_matches, sub_neg = best(i + 1, j, used | {j})
            new_chunk = 0 if j == prev_ref + 1 else 1
            cand_value = (sub_matches + 1, sub_neg - new_chunk)
            if cand_value > value:
                value = cand_value
        memo[key] = value
        return value

    matches, neg_chunks = best(0, -2, frozenset())
    return matches, -neg_chunks


def meteor(candidate: Tokens, reference: Tokens) -> float:
    if not candidate or not reference:
        raise ValueError("candidate and reference must be nonempty")
    matches, chunks = _meteor_alignment(candidate, reference)
    if matches == 0:
        return 0.0
    precision = matches / len(candidate)
    recall = matches / len(reference)
    f_mean = 10 * precision * recall / (recall + 9 * precision)
    penalty = 0.5 * (chunks / matches) ** 3
    return f_mean * (1.0 - penalty)


def expand_references(
    games: Iterable[Game],
) -> dict[str, list[tuple[str, ...]]]:
    """All gold-matched sentences per MR surface form, pooled across games.

    Generation for an MR is scored against every sentence any commentator
    produced for an identical MR anywhere in the test data.
    """
    refs: dict[str, list[tuple[str, ...]]] = {}
    for game in games:
        if game.gold is None:
            continue
        by_id = {e.id: e for e in game.events}
        comments = {c.id: c for c in game.comments}
        for comment_id in sorted(game.gold.matches):
            event_id = game.gold.matches[comment_id]
            if event_id is None:
                continue
            key = mrl.serialize_mr(by_id[event_id].mr)
            refs.setdefault(key, []).append(comments[comment_id].tokens)
    return refs


def _fmt(value: float) -> str:
    return f"{value:.12g}"


def report_to_tsv(report: EvalReport) -> str:
    lines = [f"task\t{report.task}"]
    for name in ("precision", "recall", "f1", "bleu", "nist"):
        value = getattr(report, name)
        if value is not None:
            lines.append(f"{name}\t{_fmt(value)}")
    for name in sorted(report.counts):
        lines.append(f"count.{name}\t{report.counts[name]}")
    for split in sorted(report.breakdown):
        for name in sorted(report.breakdown[split]):
            lines.append(f"{split}.{name}\t{_fmt(report.breakdown[split][name])}")
    return "".join(line + "\n" for line in lines)


def report_to_text(report: EvalReport) -> str:
    parts = [f"== {report.task} =="]
    for name in ("precision", "recall", "f1", "bleu", "nist"):
        value = getattr(report, name)
        if value is not None:
            parts.append(f"  {name:<9} {_fmt(value)}")
    if report.counts:
        counts = ", ".join(f"{k}={report.counts[k]}" for k in sorted(report.counts))
        parts.append(f"  counts    {counts}")
    for split in sorted(report.breakdown):
        values = report.breakdown[split]
        inner = ", ".join(f"{k}={_fmt(values[k])}" for k in sorted(values))
        parts.append(f"  {split}: {inner}")
    return "".join(p + "\n" for p in parts)


def report_to_json(report: EvalReport) -> str:
    payload: dict = {"task": report.task}
    for name in ("precision", "recall", "f1", "bleu", "nist"):
        value = getattr(report, name)
        if value is not None:
            payload[name] = value
    if report.counts:
        payload["counts"] = dict(sorted(report.counts.items()))
    if report.breakdown:
        payload["breakdown"] = {
            k: dict(sorted(v.items())) for k, v in sorted(report.breakdown.items())
        }
    return json.dumps(payload, sort_keys=True) + "\n"
