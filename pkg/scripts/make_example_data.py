"""Generate an example counts CSV from a built-in scenario.

Usage: python scripts/make_example_data.py [scenario] [n_per_trial] [seed] [out.csv]
"""

import sys

from pstrata.cli import counts_to_csv
from pstrata.simulation import builtin_scenarios, generate_dataset


def main(argv):
    scenario = argv[1] if len(argv) > 1 else "nonmonotone-3"
    n_per_trial = int(argv[2]) if len(argv) > 2 else 2000
    seed = int(argv[3]) if len(argv) > 3 else 0
    out = argv[4] if len(argv) > 4 else "example_counts.csv"
    counts = generate_dataset(builtin_scenarios()[scenario], seed=seed, n_per_trial=n_per_trial)
    counts_to_csv(counts, out)
    print(f"wrote {counts.total} units across {counts.n_trials} trials to {out}")


if __name__ == "__main__":
    main(sys.argv)
