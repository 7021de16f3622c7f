"""Race the disambiguation strategies on one synthetic corpus.

Each strategy starts from the same ambiguous examples and retrains until
its matching stops moving; gold is used only for scoring (and for the
`gold` upper baseline).  Expect random < parse_score/nist_gen < nist_igsl,
with gold as the ceiling.

Run: python3 demos/compare_strategies.py   (about a minute)
"""

import time

from sportscaster import corpus, learner, metrics, simgen, strategic


def main() -> None:
    world = simgen.default_world(seed=3)
    profile = simgen.default_profile(seed=1003)
    sim = simgen.simulate_corpus(world, profile, 8)
    examples = corpus.pooled_examples(sim.games)
    gold = corpus.pooled_gold(sim.games)
    totals = strategic.count_event_types(e for g in sim.games for e in g.events)

    none_fraction = sum(1 for v in gold.values() if v is None) / len(gold)
    print(f"{len(examples)} comments over {len(sim.games)} games, "
          f"{none_fraction:.0%} superfluous\n")
    print(f"{'strategy':12s} {'matching F1':>11s} {'iterations':>10s} {'seconds':>8s}")

    for kind in ("random", "parse_score", "nist_gen", "nist_igsl", "gold"):
        start = time.perf_counter()
        result = learner.retrain_loop(
            examples,
            learner.ScoringStrategy(kind, seed=1),
            total_count=totals,
            gold=gold,
        )
        f1 = metrics.matching_f1(result.matching.event_ids(), gold).f1
        print(f"{kind:12s} {f1:11.3f} {result.iterations_run:10d} "
              f"{time.perf_counter() - start:8.1f}")


if __name__ == "__main__":
    main()
