"""Plot CSVs written by run_presets.py (needs matplotlib).

    python3 scripts/plot_results.py results/tep-vs-load.csv --by lambda
    python3 scripts/plot_results.py results/bound-vs-radius.csv
"""

import argparse
import csv
from collections import defaultdict
from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def read(path):
    lines = [line for line in Path(path).read_text().splitlines() if not line.startswith("#")]
    return list(csv.DictReader(lines))


def plot_tep(rows, by, ax):
    series = defaultdict(list)
    for r in rows:
        if r["rho_db"] != "inf":
            series[r[by]].append((float(r["rho_db"]), float(r["tep"]), float(r["bound"])))
    for key, pts in sorted(series.items(), key=lambda kv: float(kv[0])):
        pts.sort()
        x, y, b = zip(*pts)
        (line,) = ax.semilogy(x, y, "o-", label=f"{by}={key}")
        if b[0] > 0:
            ax.axhline(b[0], ls="--", color=line.get_color(), lw=0.8)
    ax.set_xlabel("rho (dB)")
    ax.set_ylabel("TEP")


def plot_bound(rows, ax):
    series = defaultdict(list)
    for r in rows:
        series[(r["speed_kmh"], r["lambda"])].append((float(r["r_c_m"]), float(r["bound"])))
    for (v, lam), pts in sorted(series.items()):
        x, y = zip(*sorted(pts))
        ax.semilogy(x, y, label=f"{v} km/h, lambda={lam}")
    ax.set_xlabel("cell radius (m)")
    ax.set_ylabel("collision bound")


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    p.add_argument("csv")
    p.add_argument("--by", default="lambda", help="column distinguishing TEP curves")
    p.add_argument("--out")
    args = p.parse_args(argv)
    rows = read(args.csv)
    fig, ax = plt.subplots(figsize=(6, 4.5))
    if rows and "tep" in rows[0]:
        plot_tep(rows, args.by, ax)
    else:
        plot_bound(rows, ax)
    ax.grid(True, which="both", alpha=0.3)
    ax.legend(fontsize=7)
    out = args.out or str(Path(args.csv).with_suffix(".png"))
    fig.tight_layout()
    fig.savefig(out, dpi=150)
    print(out)


if __name__ == "__main__":
    main()
