import pytest

from sportscaster import corpus, learner, metrics, mrl, strategic, translator
from sportscaster.learner import Matching, ScoringStrategy


def _mr(surface):
    return mrl.parse_mr(surface)


# Players recur across couples in different roles so alignment can tell the
# name tokens apart; a disjoint pool per couple would leave EM symmetric.
_COUPLES = {
    "game1": [
        ("pink1", ("pink2", "pink3")),
        ("pink2", ("pink3", "pink4")),
        ("pink3", ("pink4", "pink1")),
        ("pink4", ("pink1", "pink2")),
    ],
    "game2": [
        ("pink2", ("pink1", "pink4")),
        ("pink4", ("pink3", "pink2")),
        ("pink1", ("pink4", "pink3")),
        ("pink3", ("pink2", "pink1")),
    ],
}


def _build_games(noise=False):
    games = []
    for name, game_couples in _COUPLES.items():
        events, comments, gold = [], [], {}
        t, eid, cid = 0, 1, 1
        for kicker, (src, dst) in game_couples:
            kick = corpus.GameEvent(t, _mr(f"kick ( {kicker} )"), eid)
            pas = corpus.GameEvent(t + 1000, _mr(f"pass ( {src} , {dst} )"), eid + 1)
            events += [kick, pas]
            comments += [
                corpus.make_comment(t + 1500, f"{kicker} boots it", "en", cid),
                corpus.make_comment(t + 2500, f"{src} passes to {dst}", "en", cid + 1),
            ]
            gold[cid] = kick.id
            gold[cid + 1] = pas.id
            cid += 2
            if noise and name == "game1":
                comments.append(
                    corpus.make_comment(t + 3000, "zorp blee grum nak", "en", cid)
                )
                gold[cid] = None
                cid += 1
            t += 20000
            eid += 2
        games.append(
            corpus.Game(name, tuple(events), tuple(comments), corpus.GoldMatch(gold))
        )
    return games


@pytest.fixture(scope="module")
def clean():
    games = _build_games()
    examples = corpus.pooled_examples(games)
    gold = corpus.pooled_gold(games)
    total = strategic.count_event_types(e for g in games for e in g.events)
    return games, examples, gold, total


@pytest.fixture(scope="module")
def noisy():
    games = _build_games(noise=True)
    return games, corpus.pooled_examples(games), corpus.pooled_gold(games)


@pytest.fixture(scope="module")
def sharp_model(clean):
    _, examples, gold, _ = clean
    pairs = [
        (ex.example.comment.tokens, cand.mr)
        for ex in examples
        for cand in ex.example.candidates
        if cand.id == gold[ex.key]
    ]
    return translator.train(pairs)


def test_strategy_kind_validated():
    with pytest.raises(ValueError):
        ScoringStrategy("bogus")


def test_initial_training_set_is_cartesian_sentence_major():
    def ev(t, s, i):
        return corpus.GameEvent(t, _mr(s), i)

    e1, e2, e3 = ev(0, "kick ( pink1 )", 1), ev(5, "kick ( pink2 )", 2), ev(9, "kick ( pink3 )", 3)
    c = [corpus.make_comment(10 + i, f"s{i}", "en", i) for i in range(3)]
    examples = [
        corpus.GameExample("g", corpus.AmbiguousExample(c[0], (e1, e2))),
        corpus.GameExample("g", corpus.AmbiguousExample(c[1], (e1, e2, e3))),
        corpus.GameExample("g", corpus.AmbiguousExample(c[2], (e3,))),
    ]
    pairs = learner.initial_training_set(examples)
    assert len(pairs) == 6
    assert [tokens for tokens, _ in pairs] == [
        c[0].tokens, c[0].tokens, c[1].tokens, c[1].tokens, c[1].tokens, c[2].tokens
    ]
    assert [mr for _, mr in pairs[:2]] == [e1.mr, e2.mr]
    assert pairs[5][1] == e3.mr


def test_initial_training_set_empty_raises():
    with pytest.raises(learner.EmptyTrainingSet):
        learner.initial_training_set([])


def test_evaluate_parse_score_matches_translator(sharp_model):
    tokens = ("pink1", "boots", "it")
    mr = _mr("kick ( pink1 )")
    got = learner.evaluate_candidate(tokens, mr, sharp_model, ScoringStrategy("parse_score"))
    assert got == translator.score_pair(tokens, mr, sharp_model)


def test_evaluate_nist_gen_matches_manual(sharp_model):
    tokens = ("pink1", "boots", "it")
    mr = _mr("kick ( pink1 )")
    generated = translator.generate_topk(mr, sharp_model, 1)[0][0]
    expected = metrics.nist(list(tokens), list(generated))
    got = learner.evaluate_candidate(tokens, mr, sharp_model, ScoringStrategy("nist_gen"))
    assert got == pytest.approx(expected, rel=1e-12)
    assert got > 0


def test_evaluate_meteor_gen_matches_manual(sharp_model):
    tokens = ("pink2", "passes", "to", "pink3")
    mr = _mr("pass ( pink2 , pink3 )")
    generated = translator.generate_topk(mr, sharp_model, 1)[0][0]
    expected = metrics.meteor(list(tokens), list(generated))
    got = learner.evaluate_candidate(tokens, mr, sharp_model, ScoringStrategy("meteor_gen"))
    assert got == pytest.approx(expected, rel=1e-12)


def test_evaluate_missing_template_scores_zero(sharp_model):
    got = learner.evaluate_candidate(
        ("pink1", "boots", "it"), _mr("steal ( pink5 )"), sharp_model,
        ScoringStrategy("nist_gen"),
    )
    assert got == 0.0


def test_evaluate_igsl_needs_strategic_model(sharp_model):
    with pytest.raises(learner.MissingStrategicModel):
        learner.evaluate_candidate(
            ("pink1", "boots", "it"), _mr("kick ( pink1 )"), sharp_model,
            ScoringStrategy("nist_igsl"),
        )


def test_evaluate_igsl_multiplies_event_probability(sharp_model):
    tokens = ("pink1", "boots", "it")
    mr = _mr("kick ( pink1 )")
    model = strategic.StrategicModel(prob={"kick": 0.25}, total_count={"kick": 4})
    base = learner.evaluate_candidate(tokens, mr, sharp_model, ScoringStrategy("nist_gen"))
    got = learner.evaluate_candidate(
        tokens, mr, sharp_model, ScoringStrategy("nist_igsl"), model
    )
    assert got == pytest.approx(0.25 * base, rel=1e-12)
    # an event type the strategic model has never seen contributes nothing
    assert learner.evaluate_candidate(
        ("pink2", "passes", "to", "pink3"), _mr("pass ( pink2 , pink3 )"),
        sharp_model, ScoringStrategy("meteor_igsl"), model,
    ) == 0.0


def test_evaluate_rejects_non_scoring_kinds(sharp_model):
    for kind in ("random", "gold"):
        with pytest.raises(ValueError):
            learner.evaluate_candidate(
                ("pink1",), _mr("kick ( pink1 )"), sharp_model, ScoringStrategy(kind)
            )


def test_matching_equality_ignores_scores():
    a = Matching({("g", 1): (4, 0.5)})
    b = Matching({("g", 1): (4, 0.9)})
    c = Matching({("g", 1): (5, 0.5)})
    assert a == b
    assert a != c


@pytest.mark.parametrize("kind", ["parse_score", "nist_gen", "meteor_gen"])
def test_retrain_recovers_gold_matching(clean, kind):
    _, examples, gold, _ = clean
    result = learner.retrain_loop(examples, ScoringStrategy(kind), gold=gold)
    assert metrics.matching_f1(result.matching.event_ids(), gold).f1 == 1.0
    assert result.history[-1].changed == 0
    assert result.history[-1].matching_f1 == 1.0
    assert result.iterations_run == len(result.history)
    assert result.trained_on == frozenset(result.matching.assignments)


@pytest.mark.parametrize("kind", ["nist_igsl", "meteor_igsl"])
def test_retrain_igsl_strategies(clean, kind):
    _, examples, gold, total = clean
    result = learner.retrain_loop(
        examples, ScoringStrategy(kind), total_count=total, gold=gold
    )
    assert result.strategic is not None
    assert metrics.matching_f1(result.matching.event_ids(), gold).f1 == 1.0


def test_retrain_igsl_requires_totals(clean):
    _, examples, _, _ = clean
    with pytest.raises(learner.MissingStrategicModel):
        learner.retrain_loop(examples, ScoringStrategy("nist_igsl"))


def test_retrain_stops_on_stable_matching(clean):
    _, examples, gold, _ = clean
    result = learner.retrain_loop(examples, ScoringStrategy("parse_score"), gold=gold)
    assert result.iterations_run < learner.DEFAULT_MAX_ITER
    assert result.history[-1].changed == 0
    # the final model was trained on the matching it agreed with
    truncated = learner.retrain_loop(
        examples, ScoringStrategy("parse_score"), max_iter=result.iterations_run
    )
    assert truncated.matching == result.matching


def test_retrain_is_deterministic(clean, tmp_path):
    _, examples, _, total = clean
    dumps = []
    for n in range(2):
        result = learner.retrain_loop(
            examples, ScoringStrategy("nist_igsl"), total_count=total
        )
        path = tmp_path / f"model{n}.tsv"
        translator.save_model(result.model, path)
        dumps.append((result.matching, path.read_text(encoding="utf-8")))
    assert dumps[0][0] == dumps[1][0]
    assert dumps[0][1] == dumps[1][1]


def test_retrain_empty_examples_raise():
    with pytest.raises(learner.EmptyTrainingSet):
        learner.retrain_loop([], ScoringStrategy("parse_score"))


def test_retrain_assignments_stay_within_candidates(clean):
    _, examples, _, _ = clean
    result = learner.retrain_loop(examples, ScoringStrategy("parse_score"), max_iter=1)
    by_key = {ex.key: ex for ex in examples}
    assert set(result.matching.assignments) == set(by_key)
    for key, (event_id, score) in result.matching.assignments.items():
        assert event_id in {c.id for c in by_key[key].example.candidates}
        assert score >= 0.0


def test_random_strategy_is_one_shot_and_seeded(clean):
    _, examples, gold, _ = clean
    a = learner.retrain_loop(examples, ScoringStrategy("random", seed=3), gold=gold)
    b = learner.retrain_loop(examples, ScoringStrategy("random", seed=3))
    assert a.iterations_run == 1
    assert len(a.history) == 1
    assert a.matching == b.matching
    by_key = {ex.key: ex for ex in examples}
    for key, (event_id, _) in a.matching.assignments.items():
        assert event_id in {c.id for c in by_key[key].example.candidates}
    matchings = {
        tuple(sorted(
            learner.retrain_loop(examples, ScoringStrategy("random", seed=s))
            .matching.event_ids().items()
        ))
        for s in range(6)
    }
    assert len(matchings) > 1


def test_gold_strategy_trains_on_gold(clean):
    _, examples, gold, _ = clean
    result = learner.retrain_loop(examples, ScoringStrategy("gold"), gold=gold)
    assert metrics.matching_f1(result.matching.event_ids(), gold).f1 == 1.0
    assert result.iterations_run == 1
    parsed = translator.parse_sentence(("pink1", "boots", "it"), result.model)
    assert parsed and parsed[0][0] == _mr("kick ( pink1 )")


def test_gold_strategy_without_gold_raises(clean):
    _, examples, _, _ = clean
    with pytest.raises(ValueError):
        learner.retrain_loop(examples, ScoringStrategy("gold"))


def test_external_pairs_seed_first_iteration(clean, tmp_path):
    _, examples, gold, _ = clean
    by_key = {ex.key: ex for ex in examples}
    lines = []
    for key, event_id in gold.items():
        ex = by_key[key]
        event = next(c for c in ex.example.candidates if c.id == event_id)
        lines.append(f"{key[0]}\t{key[1]}\t{mrl.serialize_mr(event.mr)}\n")
    path = tmp_path / "seed.tsv"
    path.write_text("".join(lines), encoding="utf-8")
    pairs, warnings = learner.init_from_external(examples, path)
    assert warnings == 0
    assert len(pairs) == len(examples)
    result = learner.retrain_loop(
        examples, ScoringStrategy("parse_score"), gold=gold, initial_pairs=pairs
    )
    assert result.history[0].matching_f1 == 1.0


def test_external_skips_bad_lines_with_warnings(clean, tmp_path):
    _, examples, _, _ = clean
    ex = examples[0]
    good = ex.example.candidates[0]
    path = tmp_path / "seed.tsv"
    path.write_text(
        f"game1\t999\t{mrl.serialize_mr(good.mr)}\n"      # unknown comment
        f"game1\t{ex.example.comment.id}\tsteal ( purple9 )\n"  # not a candidate
        f"game1\t{ex.example.comment.id}\t{mrl.serialize_mr(good.mr)}\n",
        encoding="utf-8",
    )
    pairs, warnings = learner.init_from_external(examples, path)
    assert warnings == 1          # later line overrides the rejected middle one
    assert pairs == [(ex.example.comment.tokens, good.mr)]


def test_external_rejects_malformed_lines(clean, tmp_path):
    _, examples, _, _ = clean
    path = tmp_path / "seed.tsv"
    path.write_text("game1\t1\n", encoding="utf-8")
    with pytest.raises(corpus.FormatError) as err:
        learner.init_from_external(examples, path)
    assert err.value.line == 1
    path.write_text("game1\tone\tkick ( pink1 )\n", encoding="utf-8")
    with pytest.raises(corpus.FormatError):
        learner.init_from_external(examples, path)
    path.write_text("game1\t1\tkick ( pink1\n", encoding="utf-8")
    with pytest.raises(corpus.FormatError):
        learner.init_from_external(examples, path)


def test_prune_keys_quantile_behaviour():
    matching = Matching({
        ("g", 1): (1, 0.1), ("g", 2): (2, 0.2),
        ("g", 3): (3, 0.3), ("g", 4): (4, 0.4),
    })
    assert learner._prune_keys(matching, 0.0) == frozenset(matching.assignments)
    kept = learner._prune_keys(matching, 0.5)
    assert kept == frozenset({("g", 3), ("g", 4)})
    # ties at the cut survive
    tied = Matching({("g", i): (i, 0.1) for i in range(4)})
    assert learner._prune_keys(tied, 0.5) == frozenset(tied.assignments)


def test_pruning_drops_superfluous_comments(noisy):
    _, examples, gold = noisy
    result = learner.retrain_loop(
        examples, ScoringStrategy("parse_score"), prune_fraction=0.2, gold=gold
    )
    pruned = set(result.matching.assignments) - set(result.trained_on)
    assert pruned
    assert all(gold[key] is None for key in pruned)
    kept_ids = {
        key: event_id
        for key, (event_id, _) in result.matching.assignments.items()
        if key in result.trained_on
    }
    assert metrics.matching_f1(kept_ids, gold).f1 == 1.0


def test_validation_split_is_deterministic(clean):
    _, examples, _, _ = clean
    many = examples * 40  # same keys repeat; split must be keyed, not positional
    a_train, a_val = learner.validation_split(many)
    b_train, b_val = learner.validation_split(list(reversed(many)))
    assert {e.key for e in a_train}.isdisjoint({e.key for e in a_val})
    assert {e.key for e in a_train} == {e.key for e in b_train}
    assert len(a_train) + len(a_val) == len(many)


def test_validation_split_fraction():
    def ev(i):
        return corpus.GameEvent(0, _mr("kick ( pink1 )"), 1)

    examples = [
        corpus.GameExample(
            f"g{i % 7}",
            corpus.AmbiguousExample(
                corpus.make_comment(10, "x", "en", i), (ev(i),)
            ),
        )
        for i in range(500)
    ]
    _, val = learner.validation_split(examples)
    assert 0.12 < len(val) / 500 < 0.28


def test_superfluous_cv_clean_corpus_prefers_no_pruning(clean):
    _, examples, gold, _ = clean
    theta, filtered, result = learner.superfluous_cv(
        examples, [0.0, 0.2], ScoringStrategy("parse_score"), gold=gold
    )
    assert theta == 0.0
    assert filtered.assignments == result.matching.assignments
    assert metrics.matching_f1(filtered.event_ids(), gold).f1 == 1.0


def test_superfluous_cv_returns_grid_member_and_subset(noisy):
    _, examples, gold = noisy
    grid = [0.0, 0.1, 0.2, 0.3]
    theta, filtered, result = learner.superfluous_cv(
        examples, grid, ScoringStrategy("parse_score"), gold=gold
    )
    assert theta in grid
    assert set(filtered.assignments) <= set(result.matching.assignments)
    assert set(result.matching.assignments) == {ex.key for ex in examples}
    assert filtered.assignments == {
        k: v for k, v in result.matching.assignments.items() if k in result.trained_on
    }


def test_report_lines_layout(clean):
    _, examples, gold, _ = clean
    with_gold = learner.retrain_loop(
        examples, ScoringStrategy("parse_score"), gold=gold
    )
    text = learner.report_lines(with_gold)
    lines = text.splitlines()
    assert text.endswith("\n")
    assert len(lines) == with_gold.iterations_run
    first = with_gold.history[0]
    assert lines[0].split("\t") == [
        "1", f"{first.matching_f1:.12g}", str(len(examples))
    ]
    without = learner.retrain_loop(examples, ScoringStrategy("parse_score"))
    assert learner.report_lines(without).splitlines()[0].split("\t")[1] == "-"
