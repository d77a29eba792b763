"""Rebalancing a 20 vs 200 training set with generated minority series.

Ratio 0.1 is the untouched set; each larger ratio tops the minority class up
with T-CGAN samples. Short series (L=12) keep the task hard enough that the
baseline is not already perfect.

    python demos/rebalance.py [--runs N]
"""

import argparse

from tcgan.evaluation import ExperimentSpec, run_experiment, summary_table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=10)
    args = ap.parse_args()

    spec = ExperimentSpec(kind="rebalance", name="rebalance", series_len=12, n_runs=args.runs)
    out = run_experiment(spec, log=print)
    print(summary_table(out.rows))
    for ratio, method, mean, std in out.plot_rows:
        bar = "#" * int(round((mean - 0.5) * 80))
        print(f"{ratio:4.1f} {method:9s} {mean:.3f} {bar}")


if __name__ == "__main__":
    main()
