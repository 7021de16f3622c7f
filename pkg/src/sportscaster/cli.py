"""One binary, eight subcommands: the full pipeline from simulated games to
evaluated commentary.

    simulate    write a synthetic annotated corpus
    pair        ambiguity statistics of the event/comment pairing
    train       disambiguate and train a translation model
    igsl        estimate per-event-type commentary probabilities
    parse       batch sentence -> MR
    generate    batch MR -> sentence
    sportscast  produce a timed transcript for each game
    evaluate    matching / parsing / generation reports against gold

Exit status: 0 success, 1 usage error, 2 data error.  Every `--out` directory
receives `run_config.txt` echoing the effective configuration, so any output
can be reproduced bit-exactly from its own provenance.  A `--config` file
holds `key = value` defaults for the same names as the flags; explicit flags
win.  All output is deterministic: no timestamps, no machine identifiers.
"""

from __future__ import annotations

import argparse
import dataclasses
import json
import sys
from dataclasses import dataclass
from pathlib import Path

from . import corpus, learner, metrics, mrl, simgen, strategic, translator

THETA_GRID = (0.0, 0.05, 0.10, 0.15, 0.20, 0.25, 0.30, 0.35, 0.40)

STRATEGY_CHOICES = learner.STRATEGY_KINDS


class _UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        raise _UsageError(f"{self.prog}: {message}\n{self.format_usage()}")


def _fmt(value) -> str:
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        return f"{value:.12g}"
    return str(value)


@dataclass(frozen=True)
class Table:
    """A rectangular report: header row plus value rows."""

    columns: tuple[str, ...]
    rows: tuple[tuple, ...]


def table_to_tsv(table: Table) -> str:
    lines = ["\t".join(table.columns)]
    for row in table.rows:
        lines.append("\t".join(_fmt(v) for v in row))
    return "".join(line + "\n" for line in lines)


def table_to_json(table: Table) -> str:
    payload = [
        {col: value for col, value in zip(table.columns, row)} for row in table.rows
    ]
    return json.dumps(payload, sort_keys=True) + "\n"


def write_report(table: Table, path, format: str = "tsv") -> None:
    if format not in ("tsv", "json"):
        raise ValueError(f"unknown report format {format!r}")
    text = table_to_tsv(table) if format == "tsv" else table_to_json(table)
    Path(path).write_text(text, encoding="utf-8")


@dataclass(frozen=True)
class RunConfig:
    """Effective settings of one invocation; echoed into the output directory."""

    command: str = ""
    manifest: str = ""
    config: str = ""
    model: str = ""
    strategic: str = ""
    input: str = ""
    matching: str = ""
    init_alignment: str = ""
    strategy: str = "parse_score"
    window_ms: int = 5000
    max_iter: int = 10
    seed: int = 0
    games: int = 4
    topk: int = 5
    superfluous_cv: bool = False
    json: bool = False
    out: str = ""


def _run_config(args) -> RunConfig:
    # None marks "flag absent, keep the dataclass default"
    values = {
        field.name: getattr(args, field.name)
        for field in dataclasses.fields(RunConfig)
        if getattr(args, field.name, None) is not None
    }
    return RunConfig(**values)


def run_config_text(config: RunConfig) -> str:
    lines = [
        f"{field.name} = {_fmt(getattr(config, field.name))}"
        for field in dataclasses.fields(RunConfig)
    ]
    return "".join(line + "\n" for line in lines)


def _prepare_out(args) -> Path | None:
    if not args.out:
        return None
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    (out / "run_config.txt").write_text(
        run_config_text(_run_config(args)), encoding="utf-8"
    )
    return out


def _emit(table: Table, out: Path | None, name: str, as_json: bool) -> None:
    if out is None:
        sys.stdout.write(table_to_tsv(table))
    else:
        fmt = "json" if as_json else "tsv"
        ext = "json" if as_json else "tsv"
        write_report(table, out / f"{name}.{ext}", fmt)


# ---------------------------------------------------------------------------
# subcommands


def _cmd_simulate(args) -> int:
    spec = (
        simgen.load_config(args.config)
        if args.config
        else simgen.SimulationSpec(simgen.default_world(), simgen.default_profile())
    )
    world, profile = spec.world, spec.profile
    if args.seed is not None:
        world = dataclasses.replace(world, seed=args.seed)
        profile = dataclasses.replace(profile, seed=args.seed)
    games = args.games if args.games is not None else spec.games
    if not args.out:
        raise _UsageError("simulate: --out DIR is required")
    result = simgen.simulate_corpus(world, profile, games, spec.name_prefix)
    out = _prepare_out(args)
    manifest = corpus.write_corpus(result, out)
    total_events = sum(len(g.events) for g in result.games)
    total_comments = sum(len(g.comments) for g in result.games)
    print(f"wrote {len(result.games)} games ({total_events} events, "
          f"{total_comments} comments) to {manifest}")
    return 0


def _pair_table(games, window_ms: int) -> Table:
    rows = []
    pooled_counts: list[int] = []
    pooled_comments = 0
    for game in games:
        stats = corpus.pairing_stats(game.events, game.comments, window_ms)
        rows.append((
            game.name, len(game.events), stats["comments"],
            stats["with_candidates"], stats["mean_candidates"],
            stats["stddev_candidates"], stats["max_candidates"],
        ))
        pooled_comments += stats["comments"]
        pooled_counts.extend(
            len(ex.candidates)
            for ex in corpus.pair_with_window(game.events, game.comments, window_ms)
        )
    n = len(pooled_counts)
    mean = sum(pooled_counts) / n if n else 0.0
    var = sum((c - mean) ** 2 for c in pooled_counts) / n if n else 0.0
    rows.append((
        "TOTAL", sum(len(g.events) for g in games), pooled_comments,
        n, mean, var**0.5, max(pooled_counts, default=0),
    ))
    return Table(
        ("game", "events", "comments", "with_candidates",
         "mean_candidates", "stddev_candidates", "max_candidates"),
        tuple(rows),
    )


def _cmd_pair(args) -> int:
    loaded = corpus.load_corpus(args.manifest, args.window_ms)
    table = _pair_table(loaded.games, args.window_ms)
    out = _prepare_out(args)
    _emit(table, out, "pairing", args.json)
    return 0


def _matching_table(matching: learner.Matching) -> Table:
    rows = tuple(
        (game, comment_id, event_id, score)
        for (game, comment_id), (event_id, score) in sorted(
            matching.assignments.items()
        )
    )
    return Table(("game", "comment_id", "event_id", "score"), rows)


def _alignment_lines(examples, matching: learner.Matching) -> str:
    """The matching in the external-alignment format `train` can re-ingest."""
    by_key = {ex.key: ex.example for ex in examples}
    lines = []
    for key in sorted(matching.assignments):
        event_id, _ = matching.assignments[key]
        example = by_key[key]
        event = next(c for c in example.candidates if c.id == event_id)
        lines.append(f"{key[0]}\t{key[1]}\t{mrl.serialize_mr(event.mr)}")
    return "".join(line + "\n" for line in lines)


def _load_matching(path) -> dict[tuple[str, int], int]:
    predicted: dict[tuple[str, int], int] = {}
    with open(path, encoding="utf-8") as f:
        for lineno, line in enumerate(f, start=1):
            line = line.rstrip("\n")
            if not line or (lineno == 1 and line.startswith("game\t")):
                continue
            fields = line.split("\t")
            if len(fields) != 4:
                raise corpus.FormatError(str(path), lineno, "expected 4 fields")
            try:
                predicted[(fields[0], int(fields[1]))] = int(fields[2])
            except ValueError as err:
                raise corpus.FormatError(str(path), lineno, str(err)) from None
    return predicted


def _cmd_train(args) -> int:
    loaded = corpus.load_corpus(args.manifest, args.window_ms)
    examples = corpus.pooled_examples(loaded.games, args.window_ms)
    gold = corpus.pooled_gold(loaded.games) or None
    total = strategic.count_event_types(
        e for g in loaded.games for e in g.events
    )
    strategy = learner.ScoringStrategy(args.strategy, seed=args.seed)
    initial_pairs = None
    warnings = 0
    if args.init_alignment:
        initial_pairs, warnings = learner.init_from_external(
            examples, args.init_alignment
        )
    theta = None
    if args.superfluous_cv:
        theta, filtered, result = learner.superfluous_cv(
            examples, THETA_GRID, strategy,
            total_count=total, gold=gold, max_iter=args.max_iter,
        )
    else:
        result = learner.retrain_loop(
            examples, strategy, args.max_iter,
            total_count=total, gold=gold, initial_pairs=initial_pairs,
        )
        filtered = learner.Matching({
            k: v for k, v in result.matching.assignments.items()
            if k in result.trained_on
        })

    out = _prepare_out(args)
    summary_rows = [("strategy", args.strategy),
                    ("examples", len(examples)),
                    ("iterations", result.iterations_run),
                    ("trained_pairs", len(filtered.assignments))]
    if args.init_alignment:
        summary_rows.append(("alignment_warnings", warnings))
    if theta is not None:
        summary_rows.append(("pruning_fraction", theta))
    if gold is not None:
        f1 = metrics.matching_f1(result.matching.event_ids(), gold).f1
        summary_rows.append(("matching_f1", f1))
    summary = Table(("key", "value"), tuple(summary_rows))
    if out is None:
        sys.stdout.write(table_to_tsv(summary))
        return 0
    _emit(summary, out, "summary", args.json)
    write_report(_matching_table(result.matching), out / "matching.tsv")
    (out / "alignment.tsv").write_text(
        _alignment_lines(examples, filtered), encoding="utf-8"
    )
    (out / "history.tsv").write_text(
        "iter\tmatching_f1\tchanged\n" + learner.report_lines(result),
        encoding="utf-8",
    )
    translator.save_model(result.model, out / "model.tsv")
    if result.strategic is not None:
        strategic.save_strategic(result.strategic, out / "strategic.tsv")
    print(f"trained {args.strategy} in {result.iterations_run} iterations -> {out}")
    return 0


def _cmd_igsl(args) -> int:
    loaded = corpus.load_corpus(args.manifest, args.window_ms)
    examples = corpus.pooled_examples(loaded.games, args.window_ms)
    total = strategic.count_event_types(e for g in loaded.games for e in g.events)
    model = strategic.igsl(
        [ex.example for ex in examples], total, max_iter=args.max_iter
    )
    order = [p.name for p in mrl.PREDICATES if p.name in model.prob]
    order += sorted(set(model.prob) - set(order))
    table = Table(
        ("predicate", "events", "probability"),
        tuple((name, model.total_count.get(name, 0), model.prob[name])
              for name in order),
    )
    out = _prepare_out(args)
    _emit(table, out, "igsl", args.json)
    if out is not None:
        strategic.save_strategic(model, out / "strategic.tsv")
    return 0


def _read_lines(path) -> list[tuple[int, str]]:
    with open(path, encoding="utf-8") as f:
        return [
            (lineno, line.rstrip("\n"))
            for lineno, line in enumerate(f, start=1)
            if line.strip()
        ]


def _cmd_parse(args) -> int:
    model = translator.load_model(args.model)
    rows = []
    for _, raw in _read_lines(args.input):
        tokens = corpus.tokenize(raw, "en")
        ranked = translator.parse_sentence(tokens, model)
        surface = mrl.serialize_mr(ranked[0][0]) if ranked else "NONE"
        rows.append((" ".join(tokens), surface))
    table = Table(("sentence", "mr"), tuple(rows))
    out = _prepare_out(args)
    _emit(table, out, "parses", args.json)
    return 0


def _cmd_generate(args) -> int:
    model = translator.load_model(args.model)
    rows = []
    for lineno, raw in _read_lines(args.input):
        try:
            mr = mrl.parse_mr(raw)
        except mrl.MalformedMR as err:
            raise corpus.FormatError(str(args.input), lineno, str(err)) from None
        surface = mrl.serialize_mr(mr)
        try:
            ranked = translator.generate_topk(mr, model, args.topk)
        except translator.NoTemplate:
            rows.append((surface, 0, 0.0, "NO_TEMPLATE"))
            continue
        for rank, (tokens, score) in enumerate(ranked, start=1):
            rows.append((surface, rank, score, " ".join(tokens)))
    table = Table(("mr", "rank", "score", "sentence"), tuple(rows))
    out = _prepare_out(args)
    _emit(table, out, "generations", args.json)
    return 0


def _cmd_sportscast(args) -> int:
    model = translator.load_model(args.model)
    strat = strategic.load_strategic(args.strategic)
    loaded = corpus.load_corpus(args.manifest, args.window_ms)
    out = _prepare_out(args)
    summary_rows = []
    for index, game in enumerate(loaded.games):
        prng = simgen.Prng(simgen.derive_seed(args.seed, index, 2))
        transcript, skipped = strategic.assemble_sportscast(
            game.events, strat, model, k=args.topk, prng=prng
        )
        rows = tuple(
            (time_ms, mrl.serialize_mr(mr), " ".join(tokens))
            for time_ms, mr, tokens in transcript
        )
        table = Table(("time_ms", "mr", "sentence"), rows)
        if out is None:
            sys.stdout.write(f"# {game.name}\n")
            sys.stdout.write(table_to_tsv(table))
        else:
            write_report(table, out / f"{game.name}.transcript.tsv")
        summary_rows.append((game.name, len(transcript), len(skipped)))
    summary = Table(("game", "comments", "skipped"), tuple(summary_rows))
    _emit(summary, out, "sportscast", args.json)
    return 0


def _gold_event_mrs(game) -> dict[int, mrl.MeaningRepresentation | None]:
    by_id = {e.id: e for e in game.events}
    gold_mrs: dict[int, mrl.MeaningRepresentation | None] = {}
    for comment_id, event_id in game.gold.matches.items():
        gold_mrs[comment_id] = None if event_id is None else by_id[event_id].mr
    return gold_mrs


def _cmd_evaluate(args) -> int:
    model = translator.load_model(args.model)
    loaded = corpus.load_corpus(args.manifest, args.window_ms)
    for game in loaded.games:
        if game.gold is None:
            raise ValueError(f"game {game.name} has no gold annotations")
    gold = corpus.pooled_gold(loaded.games)

    reports = []
    if args.matching:
        predicted = _load_matching(args.matching)
        reports.append(metrics.matching_f1(predicted, gold))

    parses: dict[tuple[str, int], mrl.MeaningRepresentation | None] = {}
    gold_mrs: dict[tuple[str, int], mrl.MeaningRepresentation | None] = {}
    for game in loaded.games:
        game_gold = _gold_event_mrs(game)
        for comment in game.comments:
            key = (game.name, comment.id)
            gold_mrs[key] = game_gold.get(comment.id)
            ranked = translator.parse_sentence(comment.tokens, model)
            parses[key] = ranked[0][0] if ranked else None
    reports.append(metrics.parsing_f1(parses, gold_mrs))

    references = metrics.expand_references(loaded.games)
    segments = []
    no_template = 0
    for key in sorted(gold_mrs):
        mr = gold_mrs[key]
        if mr is None:
            continue
        try:
            generated = translator.generate_topk(mr, model, 1)[0][0]
        except translator.NoTemplate:
            no_template += 1
            continue
        segments.append((list(generated), references[mrl.serialize_mr(mr)]))
    bleu = metrics.bleu_document(segments) if segments else 0.0
    # per-segment NIST takes the closest reference; the document score is the mean
    nist_total = 0.0
    for candidate, refs in segments:
        nist_total += max(metrics.nist(candidate, list(ref)) for ref in refs)
    reports.append(metrics.EvalReport(
        task="generation",
        bleu=bleu,
        nist=nist_total / len(segments) if segments else 0.0,
        counts={"segments": len(segments), "no_template": no_template},
    ))

    out = _prepare_out(args)
    for report in reports:
        if out is None:
            sys.stdout.write(metrics.report_to_text(report) + "\n")
        elif args.json:
            (out / f"report_{report.task}.json").write_text(
                metrics.report_to_json(report), encoding="utf-8"
            )
        else:
            (out / f"report_{report.task}.tsv").write_text(
                metrics.report_to_tsv(report), encoding="utf-8"
            )
    return 0


_COMMANDS = {
    "simulate": _cmd_simulate,
    "pair": _cmd_pair,
    "train": _cmd_train,
    "igsl": _cmd_igsl,
    "parse": _cmd_parse,
    "generate": _cmd_generate,
    "sportscast": _cmd_sportscast,
    "evaluate": _cmd_evaluate,
}


def _build_parser() -> tuple[_Parser, dict[str, _Parser]]:
    parser = _Parser(prog="sportscaster", description=__doc__)
    subs = parser.add_subparsers(dest="command", required=True)
    by_name: dict[str, _Parser] = {}

    def sub(name: str, **kwargs) -> _Parser:
        p = subs.add_parser(name, **kwargs)
        p.add_argument("--config", default="", help="key = value defaults file")
        p.add_argument("--out", default="", help="output directory")
        by_name[name] = p
        return p

    def common(p: _Parser, *, manifest=True, window=True, as_json=True):
        if manifest:
            # not argparse-required so a --config file may supply it
            p.add_argument("--manifest", default="", help="corpus manifest TSV")
        if window:
            p.add_argument("--window-ms", type=int, default=5000, dest="window_ms")
        if as_json:
            p.add_argument("--json", action="store_true")

    p = sub("simulate", help="write a synthetic annotated corpus")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--games", type=int, default=None)

    p = sub("pair", help="pairing ambiguity statistics")
    common(p)

    p = sub("train", help="disambiguate and train a translation model")
    common(p)
    p.add_argument("--strategy", choices=STRATEGY_CHOICES, default="parse_score")
    p.add_argument("--max-iter", type=int, default=10, dest="max_iter")
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--init-alignment", default="", dest="init_alignment",
                   help="external `game\\tcomment\\tmr` seed pairs")
    p.add_argument("--superfluous-cv", action="store_true", dest="superfluous_cv")

    p = sub("igsl", help="per-event-type commentary probabilities")
    common(p)
    p.add_argument("--max-iter", type=int, default=strategic.DEFAULT_MAX_ITER,
                   dest="max_iter")

    p = sub("parse", help="batch sentence -> MR")
    p.add_argument("model", help="trained model file")
    p.add_argument("input", help="one sentence per line")
    common(p, manifest=False, window=False)

    p = sub("generate", help="batch MR -> sentence")
    p.add_argument("model")
    p.add_argument("input", help="one MR per line")
    p.add_argument("--topk", type=int, default=5)
    common(p, manifest=False, window=False)

    p = sub("sportscast", help="timed transcript for each game")
    p.add_argument("model")
    p.add_argument("strategic")
    common(p)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--topk", type=int, default=5)

    p = sub("evaluate", help="reports against gold annotations")
    p.add_argument("model")
    common(p)
    p.add_argument("--matching", default="", help="matching TSV from `train`")

    return parser, by_name


def _coerce(value: str, default) -> object:
    if isinstance(default, bool):
        if value.lower() in ("true", "1", "yes"):
            return True
        if value.lower() in ("false", "0", "no"):
            return False
        raise ValueError(f"expected a boolean, got {value!r}")
    if isinstance(default, int):
        return int(value)
    return value


def _load_cli_config(path, sub: _Parser) -> dict:
    defaults = {
        action.dest: action.default
        for action in sub._actions
        if action.dest not in ("help", "config")
    }
    overrides = {}
    for lineno, line in enumerate(
        Path(path).read_text(encoding="utf-8").splitlines(), start=1
    ):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        if "=" not in line:
            raise corpus.FormatError(str(path), lineno, "expected key = value")
        key, value = (part.strip() for part in line.split("=", 1))
        if key not in defaults:
            raise corpus.FormatError(str(path), lineno, f"unknown key {key!r}")
        try:
            overrides[key] = _coerce(value, defaults[key])
        except ValueError as err:
            raise corpus.FormatError(str(path), lineno, str(err)) from None
    return overrides


def run(argv) -> int:
    try:
        parser, subs = _build_parser()
        args = parser.parse_args(argv)
        if args.config and args.command != "simulate":
            overrides = _load_cli_config(args.config, subs[args.command])
            parser, subs = _build_parser()
            subs[args.command].set_defaults(**overrides)
            args = parser.parse_args(argv)
        if getattr(args, "manifest", None) == "":
            raise _UsageError(f"{args.command}: --manifest is required")
        return _COMMANDS[args.command](args)
    except _UsageError as err:
        print(str(err), file=sys.stderr)
        return 1
    except SystemExit as err:  # argparse --help
        return int(err.code or 0)
    except (ValueError, OSError, translator.NoTemplate) as err:
        print(f"error: {err}", file=sys.stderr)
        return 2


def main() -> None:
    sys.exit(run(sys.argv[1:]))


if __name__ == "__main__":  # pragma: no cover
    main()
