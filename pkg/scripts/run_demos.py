"""Analyze every built-in demo and print a summary table.

Usage: python scripts/run_demos.py [--resolution 3] [--threads 1] [--demo NAME ...]
"""

import argparse
import time

from canalqc.curvature import generator_curvature
from canalqc.fixtures import DEMOS, corrupted_b, demo_spec
from canalqc.qclab import analyze_grid

COLUMNS = ("demo", "kind", "pts", "class", "fit", "weyl", "gauss", "qc_id", "subproj", "codazzi", "K_gen(1)", "secs")


def row(name, resolution, threads, corrupt=False):
    spec = demo_spec(name)
    start = time.perf_counter()
    grid = analyze_grid(spec, resolution, threads=threads, b_override=corrupted_b if corrupt else None)
    secs = time.perf_counter() - start
    st = grid.structure
    kgen = generator_curvature(spec, 1.0) if spec.kind != "euclidean" else float("nan")
    return (
        name + (" (corrupted b)" if corrupt else ""),
        spec.kind,
        f"{len(grid.valid)}/{len(grid.points)}",
        ",".join(map(str, grid.class_labels)),
        f"{grid.fit_residual:.1e}",
        f"{grid.weyl_ratio:.1e}",
        f"{grid.gauss_residual:.1e}",
        f"{st.qc_part:.1e}",
        f"{st.subprojective_part:.1e}",
        f"{grid.codazzi:.1e}",
        f"{kgen:+.6f}",
        f"{secs:.1f}",
    )


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--resolution", type=int, default=3)
    parser.add_argument("--threads", type=int, default=1)
    parser.add_argument("--demo", action="append", choices=sorted(DEMOS))
    parser.add_argument("--no-corrupted", action="store_true", help="skip the corrupted-b run")
    args = parser.parse_args()

    rows = [row(name, args.resolution, args.threads) for name in (args.demo or DEMOS)]
    if not args.no_corrupted:
        rows.append(row("elliptic", args.resolution, args.threads, corrupt=True))
    widths = [max(len(c), *(len(r[i]) for r in rows)) for i, c in enumerate(COLUMNS)]
    print("  ".join(c.ljust(w) for c, w in zip(COLUMNS, widths)))
    for r in rows:
        print("  ".join(v.ljust(w) for v, w in zip(r, widths)))


if __name__ == "__main__":
    main()
