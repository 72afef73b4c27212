"""Scan Euclidean profiles R = 1 + c s^2 toward the envelope singularity.

The envelope of a Euclidean sphere family stops being regular where
1 - R'^2 - R R'' = 0.  Finite-difference residuals grow as the sampled
s-interval approaches that locus while the jet-exact quantities (fit, Gauss)
stay at round-off.  Prints one line per c.
"""

import argparse

import numpy as np

from canalqc.errors import ConstructionError
from canalqc.qclab import analyze_grid
from canalqc.shapes import CanalSpec


def regularity_margin(c, domain):
    s = np.linspace(*domain, 201)
    r, rp, rpp = 1 + c * s**2, 2 * c * s, 2 * c
    return float(np.min(1 - rp**2 - r * rpp))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--coeffs", type=float, nargs="+", default=[0.05, 0.1, 0.15, 0.2, 0.25])
    parser.add_argument("--domain", type=float, nargs=2, default=(0.9, 1.1))
    parser.add_argument("--resolution", type=int, default=3)
    args = parser.parse_args()

    print(f"{'c':>6}  {'margin':>9}  {'valid':>7}  {'fit':>8}  {'gauss':>8}  {'qc_id':>8}  {'geodesic':>8}  {'codazzi':>8}")
    for c in args.coeffs:
        spec = CanalSpec.from_strings("euclidean", ("s", "0", "0", "0", "0"), f"1 + {c!r}*s^2", args.domain)
        margin = regularity_margin(c, args.domain)
        try:
            grid = analyze_grid(spec, args.resolution)
        except ConstructionError as exc:
            print(f"{c:6.3f}  {margin:9.3e}  rejected: {exc}")
            continue
        if not grid.valid:
            print(f"{c:6.3f}  {margin:9.3e}  no valid points")
            continue
        st = grid.structure
        print(
            f"{c:6.3f}  {margin:9.3e}  {len(grid.valid):>3}/{len(grid.points):<3}  {grid.fit_residual:8.1e}  "
            f"{grid.gauss_residual:8.1e}  {st.qc_part:8.1e}  {st.r_geodesic:8.1e}  {grid.codazzi or float('nan'):8.1e}"
        )


if __name__ == "__main__":
    main()
