"""A walk through the meaning-representation language.

Prints the production inventory, enumerates the full MR space, and shows
what a derivation looks like for a handful of formulas.

Run: python3 demos/grammar_tour.py
"""

from collections import Counter

from sportscaster import mrl


def main() -> None:
    by_kind = Counter(p.lhs for p in mrl.PRODUCTIONS)
    print(f"{len(mrl.PRODUCTIONS)} productions: " +
          ", ".join(f"{kind} x{count}" for kind, count in sorted(by_kind.items())))

    mrs = mrl.enumerate_mrs()
    print(f"{len(mrs)} well-formed formulas in total")
    arities = Counter(mr.predicate.arity for mr in mrs)
    for arity in sorted(arities):
        print(f"  arity {arity}: {arities[arity]}")

    print("\nSample derivations (production sequence, head first):")
    for surface in ("ballstopped", "kick ( pink7 )", "pass ( pink3 , purple11 )",
                    "playmode ( offside_l )"):
        mr = mrl.parse_mr(surface)
        keys = " -> ".join(p.key for p in mrl.derivation(mr))
        print(f"  {surface:32s} {keys}")

    round_trips = sum(mrl.parse_mr(mrl.serialize_mr(mr)) == mr for mr in mrs)
    print(f"\nround-trip serialize/parse: {round_trips}/{len(mrs)} identical")


if __name__ == "__main__":
    main()
