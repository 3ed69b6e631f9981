"""Weak-convergence table of Chambert-Loir measures of PL approximations.

Prints ``N, atoms, mass, weak distance, ratio`` for ``g = g_can + phi`` on R/Z
with a user-chosen periodic part against its Hessian density.

    python3 scripts/convergence_table.py --periodic "1/50*cos(1)" --n 4 8 16 32 64
"""

import argparse

from tropma import GreenData, GreenFunction, Lattice
from tropma._exact import fmt
from tropma.clmeasure import chambert_loir_measure, harmonic_battery, hessian_density, weak_distance
from tropma.green import hessian_bounds
from tropma.periodic import parse_harmonics
from tropma.plapprox import build_pl_approx


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--periodic", default="1/50*cos(1)", help="harmonic expression for phi")
    ap.add_argument("--n", type=int, nargs="+", default=[4, 8, 16, 32, 64])
    ap.add_argument("--density-grid", type=int, default=256)
    args = ap.parse_args()

    lat = Lattice.standard(1)
    g = GreenFunction(GreenData(lat, ((1,),)), parse_harmonics(args.periodic, lat))
    hb = hessian_bounds(g, 64)
    target = hessian_density(g, args.density_grid)
    battery = harmonic_battery(lat)

    print(f"{'N':>5} {'atoms':>6} {'mass':>6} {'weak_dist':>12} {'ratio':>7}")
    prev = None
    for n in args.n:
        m = chambert_loir_measure(build_pl_approx(g, n, hb))
        d = weak_distance(m, target, battery)
        ratio = f"{prev / d:7.2f}" if prev and d > 0 else " " * 7
        print(f"{n:>5} {len(m.atoms):>6} {fmt(m.mass):>6} {d:12.4e} {ratio}")
        prev = d


if __name__ == "__main__":
    main()
