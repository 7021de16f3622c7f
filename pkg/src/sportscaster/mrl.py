"""Meaning representation language for simulated soccer events.

An MR is a single atomic formula such as ``pass ( pink1 , pink2 )``: one
predicate applied to sorted constants.  The grammar is a small fixed CFG
embedded below; every well-formed MR has a unique top-down left-most
derivation, which downstream alignment code treats as the MR's production
sequence.
"""

from __future__ import annotations

import unicodedata
from dataclasses import dataclass
from functools import lru_cache

PLAYER = "PLAYER"
PLAYMODE = "PLAYMODE"


@dataclass(frozen=True)
class Predicate:
    """An event type: name plus the sorts of its argument positions."""

    name: str
    argument_sorts: tuple[str, ...]

    @property
    def arity(self) -> int:
        return len(self.argument_sorts)


@dataclass(frozen=True)
class Constant:
    """A sorted ground term (a player or a play mode)."""

    token: str
    sort: str


@dataclass(frozen=True)
class Production:
    """One CFG rule.  ``key`` is a unique short handle used by model tables."""

    lhs: str
    rhs: tuple[str, ...]
    key: str

    def __str__(self) -> str:
        return f"{self.lhs} -> {' '.join(self.rhs)}"


@dataclass(frozen=True)
class MeaningRepresentation:
    predicate: Predicate
    args: tuple[Constant, ...]

    def __post_init__(self) -> None:
        if len(self.args) != self.predicate.arity:
            raise ValueError(
                f"{self.predicate.name} takes {self.predicate.arity} args, "
                f"got {len(self.args)}"
            )
        for position, (arg, sort) in enumerate(
            zip(self.args, self.predicate.argument_sorts)
        ):
            if arg.sort != sort:
                raise ValueError(
                    f"arg {position + 1} of {self.predicate.name} must be "
                    f"{sort}, got {arg.sort} ({arg.token})"
                )


class MalformedMR(ValueError):
    """Raised by parse_mr; ``position`` is a character offset into the input."""

    def __init__(self, message: str, position: int) -> None:
        super().__init__(f"{message} (at position {position})")
        self.position = position


PREDICATES: tuple[Predicate, ...] = (
    Predicate("playmode", (PLAYMODE,)),
    Predicate("ballstopped", ()),
    Predicate("turnover", (PLAYER, PLAYER)),
    Predicate("kick", (PLAYER,)),
    Predicate("pass", (PLAYER, PLAYER)),
    Predicate("badPass", (PLAYER, PLAYER)),
    Predicate("defense", (PLAYER, PLAYER)),
    Predicate("steal", (PLAYER,)),
    Predicate("block", (PLAYER,)),
)

PLAYMODE_TOKENS: tuple[str, ...] = (
    "kick_off_l",
    "kick_off_r",
    "kick_in_l",
    "kick_in_r",
    "play_on",
    "offside_l",
    "offside_r",
    "free_kick_l",
    "free_kick_r",
    "corner_kick_l",
    "corner_kick_r",
    "goal_kick_l",
    "goal_kick_r",
    "goal_l",
    "goal_r",
)

PLAYER_TOKENS: tuple[str, ...] = tuple(
    f"{team}{i}" for team in ("pink", "purple") for i in range(1, 12)
)

CONSTANTS: tuple[Constant, ...] = tuple(
    Constant(token, PLAYMODE) for token in PLAYMODE_TOKENS
) + tuple(Constant(token, PLAYER) for token in PLAYER_TOKENS)

_PREDICATE_BY_NAME = {p.name: p for p in PREDICATES}
_CONSTANT_BY_TOKEN = {c.token: c for c in CONSTANTS}


def _build_productions() -> tuple[Production, ...]:
    rules = []
    for p in PREDICATES:
        if p.arity == 0:
            rhs: tuple[str, ...] = (p.name,)
        else:
            inner: list[str] = []
            for i, sort in enumerate(p.argument_sorts):
                if i:
                    inner.append(",")
                inner.append(f"*{sort}")
            rhs = (p.name, "(", *inner, ")")
        rules.append(Production("*S", rhs, p.name))
    for c in CONSTANTS:
        rules.append(Production(f"*{c.sort}", (c.token,), c.token))
    return tuple(rules)


PRODUCTIONS: tuple[Production, ...] = _build_productions()
_PRODUCTION_BY_KEY = {prod.key: prod for prod in PRODUCTIONS}


def production_for_predicate(predicate: Predicate) -> Production:
    return _PRODUCTION_BY_KEY[predicate.name]


def production_for_constant(constant: Constant) -> Production:
    return _PRODUCTION_BY_KEY[constant.token]


def production_by_key(key: str) -> Production:
    return _PRODUCTION_BY_KEY[key]


def serialize_mr(mr: MeaningRepresentation) -> str:
    """Canonical surface form: ``pred ( a1 , a2 )``, or bare ``pred`` at arity 0."""
    if not mr.args:
        return mr.predicate.name
    inner = " , ".join(a.token for a in mr.args)
    return f"{mr.predicate.name} ( {inner} )"


def parse_mr(text: str) -> MeaningRepresentation:
    """Parse an MR surface string, accepting arbitrary whitespace between tokens."""
    normalized = unicodedata.normalize("NFC", text)
    tokens: list[tuple[str, int]] = []
    i = 0
    while i < len(normalized):
        ch = normalized[i]
        if ch.isspace():
            i += 1
        elif ch in "(),":
            tokens.append((ch, i))
            i += 1
        else:
            j = i
            while j < len(normalized) and not normalized[j].isspace() and normalized[j] not in "(),":
                j += 1
            tokens.append((normalized[i:j], i))
            i = j

    if not tokens:
        raise MalformedMR("empty MR", 0)

    name, pos = tokens[0]
    predicate = _PREDICATE_BY_NAME.get(name)
    if predicate is None:
        raise MalformedMR(f"unknown predicate {name!r}", pos)

    if predicate.arity == 0:
        if len(tokens) > 1:
            raise MalformedMR(
                f"{name} takes no arguments but found {tokens[1][0]!r}", tokens[1][1]
            )
        return MeaningRepresentation(predicate, ())

    cursor = 1

    def expect(symbol: str) -> None:
        nonlocal cursor
        if cursor >= len(tokens):
            raise MalformedMR(f"expected {symbol!r} but input ended", len(normalized))
        tok, at = tokens[cursor]
        if tok != symbol:
            raise MalformedMR(f"expected {symbol!r}, found {tok!r}", at)
        cursor += 1

    expect("(")
    args: list[Constant] = []
    for position, sort in enumerate(predicate.argument_sorts):
        if position:
            expect(",")
        if cursor >= len(tokens):
            raise MalformedMR("expected an argument but input ended", len(normalized))
        tok, at = tokens[cursor]
        constant = _CONSTANT_BY_TOKEN.get(tok)
        if constant is None:
            raise MalformedMR(f"unknown constant {tok!r}", at)
        if constant.sort != sort:
            raise MalformedMR(
                f"arg {position + 1} of {name} must be {sort}, got {constant.sort}",
                at,
            )
        args.append(constant)
        cursor += 1
    expect(")")
    if cursor != len(tokens):
        tok, at = tokens[cursor]
        raise MalformedMR(f"unexpected trailing {tok!r}", at)
    return MeaningRepresentation(predicate, tuple(args))


def derivation(mr: MeaningRepresentation) -> tuple[Production, ...]:
    """Top-down left-most derivation: the *S rule, then one rule per argument."""
    head = production_for_predicate(mr.predicate)
    return (head,) + tuple(production_for_constant(a) for a in mr.args)


@lru_cache(maxsize=1)
def enumerate_mrs() -> tuple[MeaningRepresentation, ...]:
    """All grammar-valid MRs, in canonical serialization order."""
    by_sort: dict[str, list[Constant]] = {PLAYER: [], PLAYMODE: []}
    for c in CONSTANTS:
        by_sort[c.sort].append(c)

    out: list[MeaningRepresentation] = []
    for p in PREDICATES:
        pools = [by_sort[s] for s in p.argument_sorts]
        stack: list[tuple[Constant, ...]] = [()]
        for pool in pools:
            stack = [args + (c,) for args in stack for c in pool]
        out.extend(MeaningRepresentation(p, args) for args in stack)
    out.sort(key=serialize_mr)
    return tuple(out)
