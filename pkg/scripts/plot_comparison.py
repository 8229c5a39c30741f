"""Plot a comparison CSV written by ``neurozip eval --emit-trajectory``.

    python scripts/plot_comparison.py comparison_ID_neuro_zip.csv --out fig.png

Needs matplotlib (``pip install artifact[plots]``).
"""

import argparse
import csv

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt  # noqa: E402


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("csv")
    ap.add_argument("--out", default="comparison.png")
    args = ap.parse_args()

    with open(args.csv, newline="") as fh:
        rows = list(csv.DictReader(fh))
    col = {k: [float(r[k]) for r in rows] for k in rows[0]}

    fig, axes = plt.subplots(2, 1, sharex=True, figsize=(7, 5))
    for ax, q in zip(axes, ("p", "q")):
        ax.plot(col["t"], col[f"{q}_ref"], "k-", label="reference")
        ax.plot(col["t"], col[f"{q}_zip"], "--", label="ZIP only")
        ax.plot(col["t"], col[f"{q}_fit"], ":", label="fitted")
        ax.set_ylabel(f"{q.upper()} (pu)")
    axes[0].legend()
    axes[1].set_xlabel("t (s)")
    fig.tight_layout()
    fig.savefig(args.out, dpi=120)
    print(f"wrote {args.out}")


if __name__ == "__main__":
    main()
