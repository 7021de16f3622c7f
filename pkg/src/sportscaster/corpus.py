"""Timestamped game events and commentary, ambiguous pairing, and corpus files.

A corpus holds one or more games.  Each game is an event trace plus a comment
stream; supervision is ambiguous because a comment is paired with every event
in the preceding window rather than with a single annotated meaning.  When a
gold matching is available it maps each comment to the event that actually
prompted it (or to nothing, for superfluous chatter).
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass, field
from itertools import combinations
from pathlib import Path
from typing import Iterable, NamedTuple

from . import mrl
from .mrl import MeaningRepresentation

DEFAULT_WINDOW_MS = 5000


class FormatError(ValueError):
    def __init__(self, file: str, line: int, reason: str) -> None:
        super().__init__(f"{file}:{line}: {reason}")
        self.file = file
        self.line = line
        self.reason = reason


class DanglingGoldReference(FormatError):
    """A gold entry that names a missing comment or an unmatchable event."""


class InsufficientGames(ValueError):
    pass


@dataclass(frozen=True)
class GameEvent:
    time_ms: int
    mr: MeaningRepresentation
    id: int


@dataclass(frozen=True)
class Comment:
    time_ms: int
    tokens: tuple[str, ...]
    raw: str
    language: str
    id: int


def tokenize(raw: str, language: str) -> tuple[str, ...]:
    """NFC-normalize and whitespace-split; English text is case-folded."""
    text = unicodedata.normalize("NFC", raw)
    if language == "en":
        text = text.lower()
    return tuple(text.split())


def make_comment(time_ms: int, raw: str, language: str, id: int) -> Comment:
    # Canonical raw form collapses whitespace runs so the text is TSV-safe.
    canonical = " ".join(unicodedata.normalize("NFC", raw).split())
    tokens = tokenize(canonical, language)
    if not tokens:
        raise ValueError("comment text must contain at least one token")
    return Comment(time_ms, tokens, canonical, language, id)


@dataclass(frozen=True)
class AmbiguousExample:
    comment: Comment
    candidates: tuple[GameEvent, ...]


@dataclass(frozen=True)
class GoldMatch:
    """Maps comment id to the id of its true event; None marks superfluous."""

    matches: dict[int, int | None] = field(default_factory=dict)

    def event_for(self, comment_id: int) -> int | None:
        return self.matches.get(comment_id)


@dataclass(frozen=True)
class Game:
    name: str
    events: tuple[GameEvent, ...]
    comments: tuple[Comment, ...]
    gold: GoldMatch | None = None


@dataclass(frozen=True)
class Corpus:
    games: tuple[Game, ...]


class GameExample(NamedTuple):
    """An ambiguous example tagged with its game, for multi-game training."""

    game: str
    example: AmbiguousExample

    @property
    def key(self) -> tuple[str, int]:
        return (self.game, self.example.comment.id)


def pair_with_window(
    events: Iterable[GameEvent],
    comments: Iterable[Comment],
    window_ms: int = DEFAULT_WINDOW_MS,
) -> list[AmbiguousExample]:
    """Pair each comment with every event at most window_ms before it.

    Both window boundaries are inclusive: an event at the comment's own
    timestamp and one exactly window_ms earlier are both candidates.
    Comments with no candidate are omitted (they cannot supervise anything).
    """
    ordered = sorted(events, key=lambda e: (e.time_ms, e.id))
    out = []
    for comment in comments:
        lo = comment.time_ms - window_ms
        cands = tuple(e for e in ordered if lo <= e.time_ms <= comment.time_ms)
        if cands:
            out.append(AmbiguousExample(comment, cands))
    return out


def pairing_stats(
    events: Iterable[GameEvent],
    comments: Iterable[Comment],
    window_ms: int = DEFAULT_WINDOW_MS,
) -> dict:
    """Per-game pairing summary used by reports."""
    comments = list(comments)
    examples = pair_with_window(events, comments, window_ms)
    counts = [len(ex.candidates) for ex in examples]
    n = len(counts)
    mean = sum(counts) / n if n else 0.0
    var = sum((c - mean) ** 2 for c in counts) / n if n else 0.0
    return {
        "comments": len(comments),
        "with_candidates": n,
        "max_candidates": max(counts) if counts else 0,
        "mean_candidates": mean,
        "stddev_candidates": var**0.5,
    }


def resolve_gold_event(
    events: Iterable[GameEvent],
    comment_time_ms: int,
    mr: MeaningRepresentation,
    window_ms: int = DEFAULT_WINDOW_MS,
) -> GameEvent | None:
    """Earliest in-window event bearing the given MR, or None.

    Gold files store an MR surface rather than an event id, so two identical
    events inside one window are indistinguishable there.  Resolution always
    picks the earliest, the same preference the disambiguation loop uses for
    score ties, so a matcher that recovers the right MR is never penalized.
    """
    lo = comment_time_ms - window_ms
    for e in sorted(events, key=lambda e: (e.time_ms, e.id)):
        if lo <= e.time_ms <= comment_time_ms and e.mr == mr:
            return e
    return None


def pooled_examples(
    games: Iterable[Game], window_ms: int = DEFAULT_WINDOW_MS
) -> list[GameExample]:
    out = []
    for game in games:
        for ex in pair_with_window(game.events, game.comments, window_ms):
            out.append(GameExample(game.name, ex))
    return out


def pooled_gold(games: Iterable[Game]) -> dict[tuple[str, int], int | None]:
    gold: dict[tuple[str, int], int | None] = {}
    for game in games:
        if game.gold is None:
            continue
        for comment_id, event_id in game.gold.matches.items():
            gold[(game.name, comment_id)] = event_id
    return gold


def cv_splits(corpus: Corpus, k_train: int) -> list[tuple[list[Game], list[Game]]]:
    """All C(n, k_train) train/test partitions in lexicographic index order."""
    n = len(corpus.games)
    if not 1 <= k_train < n:
        raise InsufficientGames(
            f"need 1 <= k_train < {n} games, got k_train={k_train}"
        )
    splits = []
    for chosen in combinations(range(n), k_train):
        chosen_set = set(chosen)
        train = [corpus.games[i] for i in chosen]
        test = [corpus.games[i] for i in range(n) if i not in chosen_set]
        splits.append((train, test))
    return splits


def _read_lines(path: Path) -> list[str]:
    text = path.read_text(encoding="utf-8")
    if text.endswith("\n"):
        text = text[:-1]
    return text.split("\n") if text else []


def _load_events(path: Path) -> tuple[GameEvent, ...]:
    events = []
    last_time = -1
    for lineno, line in enumerate(_read_lines(path), start=1):
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(str(path), lineno, f"expected 2 fields, got {len(parts)}")
        try:
            time_ms = int(parts[0])
        except ValueError:
            raise FormatError(str(path), lineno, f"bad timestamp {parts[0]!r}") from None
        if time_ms < 0:
            raise FormatError(str(path), lineno, "negative timestamp")
        if time_ms < last_time:
            raise FormatError(str(path), lineno, "event times must be non-decreasing")
        try:
            mr = mrl.parse_mr(parts[1])
        except mrl.MalformedMR as err:
            raise FormatError(str(path), lineno, f"bad MR: {err}") from None
        events.append(GameEvent(time_ms, mr, len(events)))
        last_time = time_ms
    return tuple(events)


def _load_comments(path: Path) -> tuple[Comment, ...]:
    comments = []
    for lineno, line in enumerate(_read_lines(path), start=1):
        parts = line.split("\t")
        if len(parts) != 3:
            raise FormatError(str(path), lineno, f"expected 3 fields, got {len(parts)}")
        try:
            time_ms = int(parts[0])
        except ValueError:
            raise FormatError(str(path), lineno, f"bad timestamp {parts[0]!r}") from None
        try:
            comments.append(make_comment(time_ms, parts[2], parts[1], len(comments)))
        except ValueError as err:
            raise FormatError(str(path), lineno, str(err)) from None
    return tuple(comments)


def _load_gold(
    path: Path,
    events: tuple[GameEvent, ...],
    comments: tuple[Comment, ...],
    window_ms: int,
) -> GoldMatch:
    matches: dict[int, int | None] = {}
    for lineno, line in enumerate(_read_lines(path), start=1):
        parts = line.split("\t")
        if len(parts) != 2:
            raise FormatError(str(path), lineno, f"expected 2 fields, got {len(parts)}")
        try:
            comment_id = int(parts[0])
        except ValueError:
            raise FormatError(str(path), lineno, f"bad comment id {parts[0]!r}") from None
        if not 0 <= comment_id < len(comments):
            raise DanglingGoldReference(
                str(path), lineno, f"comment id {comment_id} not in corpus"
            )
        if parts[1] == "NONE":
            matches[comment_id] = None
            continue
        try:
            mr = mrl.parse_mr(parts[1])
        except mrl.MalformedMR as err:
            raise FormatError(str(path), lineno, f"bad MR: {err}") from None
        event = resolve_gold_event(
            events, comments[comment_id].time_ms, mr, window_ms
        )
        if event is None:
            raise DanglingGoldReference(
                str(path),
                lineno,
                f"no event {parts[1]!r} within {window_ms} ms of comment {comment_id}",
            )
        matches[comment_id] = event.id
    return GoldMatch(matches)


def load_corpus(manifest_path: str | Path, window_ms: int = DEFAULT_WINDOW_MS) -> Corpus:
    manifest = Path(manifest_path)
    base = manifest.parent
    games = []
    for lineno, line in enumerate(_read_lines(manifest), start=1):
        parts = line.split("\t")
        if len(parts) != 4:
            raise FormatError(str(manifest), lineno, f"expected 4 fields, got {len(parts)}")
        name, events_rel, comments_rel, gold_rel = parts
        events = _load_events(base / events_rel)
        comments = _load_comments(base / comments_rel)
        gold = None
        if gold_rel != "-":
            gold = _load_gold(base / gold_rel, events, comments, window_ms)
        games.append(Game(name, events, comments, gold))
    return Corpus(tuple(games))


def write_corpus(corpus: Corpus, out_dir: str | Path) -> Path:
    """Write canonical corpus files plus a manifest; returns the manifest path."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    manifest_lines = []
    for game in corpus.games:
        events_name = f"{game.name}.events.tsv"
        comments_name = f"{game.name}.comments.tsv"
        gold_name = f"{game.name}.gold.tsv" if game.gold is not None else "-"

        event_lines = [
            f"{e.time_ms}\t{mrl.serialize_mr(e.mr)}" for e in game.events
        ]
        (out / events_name).write_text(
            "".join(line + "\n" for line in event_lines), encoding="utf-8"
        )

        comment_lines = [
            f"{c.time_ms}\t{c.language}\t{c.raw}" for c in game.comments
        ]
        (out / comments_name).write_text(
            "".join(line + "\n" for line in comment_lines), encoding="utf-8"
        )

        if game.gold is not None:
            by_id = {e.id: e for e in game.events}
            gold_lines = []
            for comment_id in sorted(game.gold.matches):
                event_id = game.gold.matches[comment_id]
                surface = "NONE" if event_id is None else mrl.serialize_mr(by_id[event_id].mr)
                gold_lines.append(f"{comment_id}\t{surface}")
            (out / gold_name).write_text(
                "".join(line + "\n" for line in gold_lines), encoding="utf-8"
            )

        manifest_lines.append(
            f"{game.name}\t{events_name}\t{comments_name}\t{gold_name}"
        )

    manifest = out / "manifest.tsv"
    manifest.write_text(
        "".join(line + "\n" for line in manifest_lines), encoding="utf-8"
    )
    return manifest
