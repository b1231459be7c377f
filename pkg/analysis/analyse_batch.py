# SPDX-License-Identifier: MIT

import argparse
import csv

import numpy as np

COLUMNS = ["cert_rho", "mean_dtheta", "sd_dtheta", "d_E"]
BAR_WIDTH = 40


def read_columns(path):
    """Float values per summary column, taken from rows with status "ok"."""
    values = {column: [] for column in COLUMNS}
    with open(path, "r", encoding="utf-8", newline="") as f:
        for row in csv.DictReader(f):
            if row.get("status", "ok") != "ok":
                continue
            for column in COLUMNS:
                raw = row.get(column, "")
                if raw not in ("", None):
                    values[column].append(float(raw))
    return values


def histogram_lines(values, bins=10):
    counts, edges = np.histogram(values, bins=bins)
    peak = max(counts.max(), 1)
    lines = []
    for count, lo, hi in zip(counts, edges[:-1], edges[1:]):
        bar = "#" * int(round(BAR_WIDTH * count / peak))
        lines.append(f"[{lo: .4e}, {hi: .4e}) {count:6d} {bar}")
    return lines


def main(argv=None):
    parser = argparse.ArgumentParser(description="Histograms of a batch_certify CSV.")
    parser.add_argument("input_file", type=str, help="CSV written by batch_certify.py --output.")
    parser.add_argument("--bins", type=int, default=10, help="Number of histogram bins.")
    args = parser.parse_args(argv)

    values = read_columns(args.input_file)
    for column in COLUMNS:
        data = values[column]
        if not data:
            continue
        print(f"=== {column} (n={len(data)}) ===")
        print(f"mean: {np.mean(data):.6g}  SD: {np.std(data):.6g}")
        for line in histogram_lines(data, args.bins):
            print(line)
        if column == "d_E":
            print(f"d_E <= 0 in {sum(1 for d in data if d <= 0)} of {len(data)} meshes")
        print()
    return 0


if __name__ == "__main__":
    main()
