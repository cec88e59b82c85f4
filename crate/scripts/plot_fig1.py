#!/usr/bin/env python3
"""Grouped bar chart of relative modeled cost (or wall time) per query.

    python3 scripts/plot_fig1.py sweep-out/report.json -o bars.png
    python3 scripts/plot_fig1.py sweep-out/report.csv --metric wall
"""
import argparse
import json
import math
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402
import pandas as pd  # noqa: E402

COLOURS = {
    "light-blue": "#9cc9f0", "blue": "#2a6fdb", "light-green": "#a7dca0", "green": "#3c9a3c",
    "pink": "#f2a7c8", "red": "#dd3333", "light-orange": "#f7c08a", "light-purple": "#c6a8e6",
    "dark-purple": "#5b2a86", "yellow": "#e8d33a", "orange": "#f08a24",
}


def load(path: Path, metric: str):
    """Returns (configs in order, queries, {config: {query: relative value}})."""
    if path.suffix == ".json":
        report = json.loads(path.read_text())
        rel = defaultdict(dict)
        for r in report["relative"]:
            rel[r["config"]][r["query"]] = r[metric]
        queries = sorted({q for v in rel.values() for q in v})
        return report["configs"], queries, rel
    df = pd.read_csv(path)
    df = df[df["status"] == "ok"]
    rel = defaultdict(dict)
    for _, row in df.iterrows():
        rel[row["config"]][row["query"]] = row[f"relative_{metric}"]
    return list(dict.fromkeys(df["config"])), sorted(set(df["query"])), rel

def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("report", type=Path, help="report.json or report.csv")
    ap.add_argument("--metric", choices=["cost", "wall"], default="cost")
    ap.add_argument("--log", action="store_true", help="log-scale y axis")
    ap.add_argument("-o", "--out", type=Path, default=Path("bars.png"))
    args = ap.parse_args()

    configs, queries, rel = load(args.report, args.metric)
    groups = queries + ["geomean"]
    width = 0.8 / len(configs)
    fig, ax = plt.subplots(figsize=(max(8, 1.4 * len(groups)), 4.5))
    for i, c in enumerate(configs):
        vals = [rel[c].get(q, math.nan) for q in queries]
        ok = [v for v in vals if v == v and v > 0]
        vals.append(math.exp(sum(map(math.log, ok)) / len(ok)) if ok else math.nan)
        xs = [g + (i - (len(configs) - 1) / 2) * width for g in range(len(groups))]
        ax.bar(xs, vals, width, label=c, color=COLOURS.get(c), edgecolor="black", linewidth=0.4)
    ax.axhline(1.0, color="grey", linestyle="--", linewidth=0.8)
    ax.set_xticks(range(len(groups)), groups)
    ax.set_ylabel(f"relative {'modeled cost' if args.metric == 'cost' else 'wall time'}")
    if args.log:
        ax.set_yscale("log")
    ax.legend(ncol=4, fontsize=8, frameon=False)
    fig.tight_layout()
    fig.savefig(args.out, dpi=150)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
