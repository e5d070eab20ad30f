"""Overhead curves and error contours for the default wall-time parameters, written as CSV."""

import argparse
import csv
from pathlib import Path

from qemscope.budget import contour_grid, overhead_curves


def write(rows, path: Path) -> None:
    with path.open("w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=list(rows[0]), lineterminator="\n")
        w.writeheader()
        for r in rows:
            w.writerow({k: format(v, ".17g") if isinstance(v, float) else v for k, v in r.items()})


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__)
    ap.add_argument("--out-dir", type=Path, default=Path("budget_out"))
    args = ap.parse_args()
    args.out_dir.mkdir(parents=True, exist_ok=True)
    write(overhead_curves(0.0016, [10 ** k for k in range(1, 6)]), args.out_dir / "overhead_eps0.0016.csv")
    grid = list(range(10, 201, 10))
    for eps in (0.005, 0.0016):
        for tech in ("pec", "zne", "tem"):
            rows = contour_grid(tech, eps, None, grid, grid)
            write(rows, args.out_dir / f"contour_{tech}_eps{eps}.csv")
            inside = max((r["N"] for r in rows if r["N"] == r["L"] and r["delta"] <= 0.1), default=None)
            print(f"eps={eps} {tech}: largest N=L on the grid with delta <= 10%: {inside}")


if __name__ == "__main__":
    main()
