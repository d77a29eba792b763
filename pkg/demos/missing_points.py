"""Augmentation methods on irregular data with points dropped.

Compares no augmentation, time slicing, time warping and T-CGAN at 20%
missing points, then sweeps the missing fraction for the cheaper methods.
Slicing and warping see the series linearly re-interpolated onto a regular
grid; T-CGAN and the classifier see the raw (timestamp, value) pairs.

    python demos/missing_points.py [--runs N] [--length L]
"""

import argparse

from tcgan.evaluation import ExperimentSpec, run_experiment, summary_table


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--runs", type=int, default=10)
    ap.add_argument("--length", type=int, default=40)
    args = ap.parse_args()

    compare = ExperimentSpec(kind="compare", name="missing-20", series_len=args.length, missing_fraction=0.2,
                             n_runs=args.runs)
    print(summary_table(run_experiment(compare, log=print).rows))

    sweep = ExperimentSpec(kind="missing", name="sweep", series_len=args.length, n_runs=args.runs)
    print(summary_table(run_experiment(sweep, log=print).rows))


if __name__ == "__main__":
    main()
