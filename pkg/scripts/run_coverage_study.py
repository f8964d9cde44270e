"""Replicate study over the built-in scenario grid: bias, RMSE, interval coverage.

Runs each (scenario, sample size) cell with the same settings as the paper-scale
study and prints one row per stratum.  Heavy: budget minutes per cell.

Usage: python scripts/run_coverage_study.py [--replicates 200] [--seed 0]
       [--scenarios monotone-3,nonmonotone-3] [--sizes 200,500,2000] [--jobs N]
"""

import argparse
from dataclasses import replace

from pstrata import EmConfig, GibbsConfig
from pstrata.simulation import builtin_scenarios, evaluate


def main():
    parser = argparse.ArgumentParser()
    parser.add_argument("--replicates", type=int, default=200)
    parser.add_argument("--seed", type=int, default=0)
    parser.add_argument("--scenarios", default="monotone-3,nonmonotone-3")
    parser.add_argument("--sizes", default="200,500,2000")
    parser.add_argument("--jobs", type=int, default=1)
    args = parser.parse_args()

    catalogue = builtin_scenarios()
    em = EmConfig(tol=1e-7, max_iter=3000, n_starts=6)
    gibbs = GibbsConfig(iterations=20_000, burn_in=4_000)

    print("scenario,n_per_trial,stratum,bias,rmse,coverage")
    for name in args.scenarios.split(","):
        for size in (int(s) for s in args.sizes.split(",")):
            scenario = replace(catalogue[name], n_per_trial=size)
            report = evaluate(
                scenario,
                args.replicates,
                em_config=em,
                gibbs_config=gibbs,
                seed=args.seed,
                n_jobs=args.jobs,
            )
            for label in report.bias:
                print(
                    f"{name},{size},{label},{report.bias[label]:.4f},"
                    f"{report.rmse[label]:.4f},{report.coverage[label]:.3f}",
                    flush=True,
                )


if __name__ == "__main__":
    main()
