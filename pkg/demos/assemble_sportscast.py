"""From raw events to a spoken-style sportscast.

Trains the translation model on one corpus's gold matching, estimates
per-event-type commentary probabilities with the iterative strategy
learner, then commentates a game the models never saw: every second the
strategic model picks (or declines) an event from the last second and the
tactical model verbalizes it.

Run: python3 demos/assemble_sportscast.py
"""

from sportscaster import corpus, learner, simgen, strategic, translator


def main() -> None:
    world = simgen.default_world(seed=21)
    profile = simgen.default_profile(seed=1021)
    sim = simgen.simulate_corpus(world, profile, 6)
    examples = corpus.pooled_examples(sim.games)
    gold = corpus.pooled_gold(sim.games)
    totals = strategic.count_event_types(e for g in sim.games for e in g.events)

    tactical = learner.retrain_loop(
        examples, learner.ScoringStrategy("gold"), gold=gold
    ).model
    strategy = strategic.igsl([ex.example for ex in examples], totals)
    ranked = sorted(strategy.prob.items(), key=lambda kv: -kv[1])
    print("learned commentary probabilities:")
    for name, prob in ranked:
        print(f"  {name:12s} {prob:.3f}")

    fresh = simgen.simulate_corpus(
        simgen.default_world(seed=99), profile, 1, name_prefix="fresh"
    ).games[0]
    transcript, skipped = strategic.assemble_sportscast(
        fresh.events, strategy, tactical, prng=simgen.Prng(5)
    )
    print(f"\n{fresh.name}: {len(fresh.events)} events -> "
          f"{len(transcript)} comments ({len(skipped)} event types skipped)")
    for time_ms, _mr, tokens in transcript[:15]:
        minutes, seconds = divmod(time_ms // 1000, 60)
        print(f"  {minutes:02d}:{seconds:02d}  {' '.join(tokens)}")
    if len(transcript) > 15:
        print(f"  ... {len(transcript) - 15} more lines")


if __name__ == "__main__":
    main()
