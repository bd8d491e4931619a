#!/usr/bin/env python3
"""Regenerate the CSV files bundled under src/pdlmc/data/.

The generators and their seeds live in pdlmc.datasets; running this script
rewrites the shipped files byte for byte.
"""

from pathlib import Path

from pdlmc import datasets
from pdlmc.problems import write_labeled_csv

DATA = Path(__file__).resolve().parent.parent / "src" / "pdlmc" / "data"


def main():
    DATA.mkdir(parents=True, exist_ok=True)
    write_labeled_csv(datasets.synthetic_adult_table(), DATA / "synthetic_adult.csv")
    write_labeled_csv(
        datasets.synthetic_adult_table(n_rows=4000, seed=datasets.ADULT_HOLDOUT_SEED),
        DATA / "synthetic_adult_holdout.csv")
    names, series = datasets.synthetic_returns()
    datasets.write_returns_csv(names, series, DATA / "synthetic_returns.csv")
    for name in ("synthetic_adult.csv", "synthetic_adult_holdout.csv",
                 "synthetic_returns.csv"):
        print(f"wrote {DATA / name}")


if __name__ == "__main__":
    main()
