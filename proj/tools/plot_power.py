#!/usr/bin/env python3
"""Plot CSV output from `tcal power` and `tcal rate`.

Both commands write `<prefix>.csv` next to a `<prefix>.json` manifest.  This
script auto-detects which kind a CSV is by its header:

  ece,type2,se        power curve: rejection rate vs. alternative L2 ECE
  n,m,eps,censored    detection frontier: smallest detectable ECE vs. n

Several CSVs of the same kind overlay into one figure (legend labels come
from the sibling manifest when it is readable, else the file stem).

Examples:
  tools/plot_power.py power.csv more_power.csv --out power.png
  tools/plot_power.py rate.csv --guide -0.3333
"""

import argparse
import csv
import json
import math
import pathlib
import sys

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt

POWER_HEADER = ["ece", "type2", "se"]
RATE_HEADER = ["n", "m", "eps", "censored"]


def read_rows(path):
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if header is None:
            sys.exit(f"{path}: empty file")
        rows = [row for row in reader if row]
    if header == POWER_HEADER:
        kind = "power"
    elif header == RATE_HEADER:
        kind = "rate"
    else:
        sys.exit(f"{path}: unrecognized header {header!r}")
    return kind, rows


def manifest_label(csv_path):
    """Legend label from the sibling .json manifest, or the file stem."""
    stem = pathlib.Path(csv_path).stem
    mpath = pathlib.Path(csv_path).with_suffix(".json")
    try:
        with open(mpath) as fh:
            cfg = json.load(fh).get("config", {})
    except (OSError, ValueError):
        return stem
    bits = []
    if "stat" in cfg:
        bits.append(str(cfg["stat"]))
    if "family" in cfg:
        bits.append(str(cfg["family"]))
    if "n" in cfg:
        bits.append(f"n={cfg['n']}")
    return " ".join(bits) if bits else stem


def plot_power(ax, path, rows):
    ece = [float(r[0]) for r in rows]
    power = [1.0 - float(r[1]) for r in rows]
    half_width = [2.0 * float(r[2]) for r in rows]
    ax.errorbar(ece, power, yerr=half_width, marker="o", capsize=3,
                label=manifest_label(path))
    ax.set_xscale("log")
    ax.set_xlabel("alternative L2 ECE")
    ax.set_ylabel("rejection rate")
    ax.set_ylim(-0.02, 1.02)


def plot_rate(ax, path, rows, guide):
    pts = [(float(r[0]), float(r[2])) for r in rows if r[3] == "0"]
    dropped = len(rows) - len(pts)
    if dropped:
        print(f"{path}: skipped {dropped} censored point(s)", file=sys.stderr)
    if not pts:
        sys.exit(f"{path}: every point is censored; nothing to plot")
    xs = [p[0] for p in pts]
    ys = [p[1] for p in pts]
    label = manifest_label(path)
    if len(pts) >= 2:
        lx = [math.log(x) for x in xs]
        ly = [math.log(y) for y in ys]
        mx = sum(lx) / len(lx)
        my = sum(ly) / len(ly)
        sxx = sum((a - mx) ** 2 for a in lx)
        slope = sum((a - mx) * (b - my) for a, b in zip(lx, ly)) / sxx
        label += f" (slope {slope:.3f})"
        if guide is not None:
            gx = [min(xs), max(xs)]
            anchor = ys[0] * (xs[0] ** -guide)
            ax.plot(gx, [anchor * x**guide for x in gx], "k--", linewidth=1,
                    label=f"guide slope {guide:g}")
    ax.loglog(xs, ys, marker="o", label=label)
    ax.set_xlabel("sample size n")
    ax.set_ylabel("smallest detected L2 ECE")


def main():
    ap = argparse.ArgumentParser(description=__doc__,
                                 formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("csv", nargs="+", help="CSV file(s) written by tcal power/rate")
    ap.add_argument("--out", help="output image (default: first input with .png)")
    ap.add_argument("--title", default=None)
    ap.add_argument("--guide", type=float, default=None,
                    help="draw a dashed log-log reference line with this slope "
                         "(rate plots only)")
    args = ap.parse_args()

    loaded = [(path,) + read_rows(path) for path in args.csv]
    kinds = {kind for _, kind, _ in loaded}
    if len(kinds) > 1:
        sys.exit("cannot mix power and rate CSVs in one figure")
    kind = kinds.pop()

    fig, ax = plt.subplots(figsize=(6.4, 4.4))
    for path, _, rows in loaded:
        if kind == "power":
            plot_power(ax, path, rows)
        else:
            plot_rate(ax, path, rows, args.guide)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend()
    if args.title:
        ax.set_title(args.title)
    out = args.out or str(pathlib.Path(args.csv[0]).with_suffix(".png"))
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(f"wrote {out}")


if __name__ == "__main__":
    main()
