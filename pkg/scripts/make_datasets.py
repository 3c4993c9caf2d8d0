#!/usr/bin/env python3
"""Write the three benchmark-shaped synthetic CSVs used by the experiments.

Usage:
  python scripts/make_datasets.py --out data --seed 42
"""

from __future__ import annotations

import argparse
from pathlib import Path

from fairtree.data import group_counts, write_csv
from fairtree.datasets import GENERATORS


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out", default="data", help="output directory")
    ap.add_argument("--seed", type=int, default=42)
    args = ap.parse_args()

    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    for name, make in GENERATORS.items():
        table = make(seed=args.seed)
        path = out / f"{name}.csv"
        write_csv(table, path)
        c = group_counts(table)
        print(
            f"{path}: N={c.n} favored={c.n_fav} deprived={c.n_dep} "
            f"rates {c.fav_pos / c.n_fav:.3f}/{c.dep_pos / c.n_dep:.3f}"
        )


if __name__ == "__main__":
    main()
