"""End-to-end Calabi-Yau demo on R/Z.

Solves ``det(1 + phi'') = e^f`` for ``f ~ a cos(2 pi x)``, builds the PL
approximations of ``x^2/2 + phi`` and compares their Chambert-Loir measures
with ``e^f dx``.

    python3 scripts/calabi_yau_demo.py --amplitude 0.1 --grid-n 128
"""

import argparse

import numpy as np

from tropma import GreenData, Lattice
from tropma import masolver as ms
from tropma._exact import fmt
from tropma.clmeasure import DensityMeasure, chambert_loir_measure, harmonic_battery, weak_distance
from tropma.green import hessian_bounds
from tropma.plapprox import build_pl_approx


def main() -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--amplitude", type=float, default=0.1)
    ap.add_argument("--grid-n", type=int, default=128)
    ap.add_argument("--n", type=int, nargs="+", default=[8, 16, 32, 64])
    args = ap.parse_args()

    lat = Lattice.standard(1)
    data = GreenData(lat, ((1,),))
    a = args.amplitude

    def f_raw(x):
        return a * np.cos(2 * np.pi * x[:, 0])

    p = ms.normalize_density(f_raw, data, args.grid_n)
    sol = ms.solve(p)
    print(f"Newton: {sol.newton_iters} iterations, residual {sol.residual_inf:.2e}, "
          f"min eigenvalue {sol.min_eig:.4f}")
    g = ms.solution_to_green(p, sol)
    hb = hessian_bounds(g, 2 * args.grid_n)
    target = DensityMeasure(lat, lambda x: np.exp(f_raw(x)) / np.i0(a), 512)
    battery = harmonic_battery(lat)
    for n in args.n:
        m = chambert_loir_measure(build_pl_approx(g, n, hb))
        print(f"N={n:<4d} atoms={len(m.atoms):<5d} mass={fmt(m.mass)} "
              f"weak distance={weak_distance(m, target, battery):.3e}")


if __name__ == "__main__":
    main()
